//! Run configuration: one structured text file per experiment, plus the
//! `--seed`, `--out` and `--tol` overrides. Everything the run depends on
//! is named here so results stay archivable and diffable.

use num_rational::Ratio;
use serde::Deserialize;
use thermoform::{Error, Potential, Result, SftSystem, Symbol, Word};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub command: Command,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Output basename; `.csv` and `.meta` are appended.
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    #[serde(default)]
    pub map: Option<MapConfig>,
    #[serde(default)]
    pub pressure: Option<PressureConfig>,
    #[serde(default)]
    pub gibbs: Option<GibbsConfig>,
    #[serde(default)]
    pub hyp_times: Option<HypTimesConfig>,
    #[serde(default)]
    pub zoom_times: Option<ZoomTimesConfig>,
    #[serde(default)]
    pub skew: Option<SkewConfig>,
    #[serde(default)]
    pub ldp: Option<LdpConfig>,
    #[serde(default)]
    pub glue: Option<GlueConfig>,
    #[serde(default)]
    pub katok: Option<KatokConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Pressure,
    Equilibrium,
    GibbsCheck,
    HypTimes,
    ZoomTimes,
    Skew,
    Ldp,
    Glue,
    Katok,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Pressure => "pressure",
            Command::Equilibrium => "equilibrium",
            Command::GibbsCheck => "gibbs-check",
            Command::HypTimes => "hyp-times",
            Command::ZoomTimes => "zoom-times",
            Command::Skew => "skew",
            Command::Ldp => "ldp",
            Command::Glue => "glue",
            Command::Katok => "katok",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub kind: String,
    #[serde(default)]
    pub alphabet: Option<usize>,
    #[serde(default)]
    pub transitions: Option<Vec<Vec<u8>>>,
}

impl SystemConfig {
    pub fn build(&self) -> Result<SftSystem> {
        match self.kind.as_str() {
            "golden-mean" => Ok(SftSystem::golden_mean()),
            "full-shift" => {
                let n = self.alphabet.unwrap_or(2);
                Ok(SftSystem::full_shift(n))
            }
            "sft" => {
                let rows = self.transitions.as_ref().ok_or_else(|| {
                    Error::invalid_parameter("system.transitions", "required for kind = \"sft\"")
                })?;
                SftSystem::new(rows.len(), rows)
            }
            other => Err(Error::invalid_parameter(
                "system.kind",
                format!("unknown kind {other:?} (golden-mean | full-shift | sft)"),
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: String,
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl PotentialConfig {
    pub fn build(&self, system: &SftSystem) -> Result<Potential> {
        match self.kind.as_str() {
            "zero" => Ok(Potential::zero(system)),
            "bernoulli" => {
                let p = self.p.as_ref().ok_or_else(|| {
                    Error::invalid_parameter("potential.p", "required for kind = \"bernoulli\"")
                })?;
                Potential::bernoulli_log(system, p)
            }
            "symbols" => {
                let values = self.values.as_ref().ok_or_else(|| {
                    Error::invalid_parameter("potential.values", "required for kind = \"symbols\"")
                })?;
                Potential::from_symbol_values(system, values)
            }
            "matrix" => {
                let m = self.matrix.as_ref().ok_or_else(|| {
                    Error::invalid_parameter("potential.matrix", "required for kind = \"matrix\"")
                })?;
                Potential::from_log_matrix(system, m)
            }
            other => Err(Error::invalid_parameter(
                "potential.kind",
                format!("unknown kind {other:?} (zero | bernoulli | symbols | matrix)"),
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub kind: String,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub contraction: Option<f64>,
}

impl MapConfig {
    pub fn build(&self) -> Result<thermoform::MapKind> {
        match self.kind.as_str() {
            "doubling" => Ok(thermoform::MapKind::Doubling),
            "intermittent" => Ok(thermoform::MapKind::Intermittent {
                alpha: self.alpha.ok_or_else(|| {
                    Error::invalid_parameter("map.alpha", "required for kind = \"intermittent\"")
                })?,
            }),
            "deformed" => Ok(thermoform::MapKind::Deformed {
                delta: self.delta.ok_or_else(|| {
                    Error::invalid_parameter("map.delta", "required for kind = \"deformed\"")
                })?,
                contraction: self.contraction.unwrap_or(0.5),
            }),
            other => Err(Error::invalid_parameter(
                "map.kind",
                format!("unknown kind {other:?} (doubling | intermittent | deformed)"),
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureConfig {
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

fn default_mode() -> String {
    "spectral".to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub n_min: usize,
    pub n_max: usize,
    /// Pressure constant override; the spectral value is used by default.
    #[serde(default)]
    pub pressure: Option<f64>,
}

fn default_epsilon() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypTimesConfig {
    pub seeds: usize,
    pub length: usize,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn default_burn_in() -> usize {
    100_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoomTimesConfig {
    pub seeds: usize,
    pub length: usize,
    pub delta: f64,
    pub zoom: String,
    #[serde(default)]
    pub rate: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkewConfig {
    pub rate: f64,
    pub translations: Vec<f64>,
    #[serde(default = "default_diameter")]
    pub diameter: f64,
    #[serde(default)]
    pub fiber_coef: f64,
    #[serde(default)]
    pub truncation: Option<usize>,
    #[serde(default = "default_skew_n")]
    pub n: usize,
    #[serde(default = "default_fiber_depth")]
    pub fiber_depth: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_skew_samples")]
    pub samples: usize,
}

fn default_diameter() -> f64 {
    1.0
}
fn default_skew_n() -> usize {
    12
}
fn default_fiber_depth() -> usize {
    6
}
fn default_skew_samples() -> usize {
    50
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpConfig {
    pub psi_symbol: Symbol,
    /// Deviation level as an exact rational, "num/den" or a decimal string.
    pub c: String,
    pub n_values: Vec<usize>,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_t_steps")]
    pub t_steps: usize,
}

fn default_t_max() -> f64 {
    6.0
}
fn default_t_steps() -> usize {
    24
}

impl LdpConfig {
    pub fn level(&self) -> Result<Ratio<i64>> {
        parse_rational(&self.c)
            .ok_or_else(|| Error::invalid_parameter("ldp.c", format!("cannot parse {:?}", self.c)))
    }
}

/// Parse "3/4", "0.75" or "1" into an exact rational.
pub fn parse_rational(s: &str) -> Option<Ratio<i64>> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num.trim().parse().ok()?;
        let d: i64 = den.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Ratio::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let scale = 10i64.checked_pow(frac.len() as u32)?;
        let negative = int.trim_start().starts_with('-');
        let i: i64 = if int.is_empty() || int == "-" {
            0
        } else {
            int.parse().ok()?
        };
        let f: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
        let mag = i.abs().checked_mul(scale)?.checked_add(f)?;
        return Some(Ratio::new(if negative { -mag } else { mag }, scale));
    }
    s.parse::<i64>().ok().map(Ratio::from_integer)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlueConfig {
    pub segments: Vec<String>,
}

impl GlueConfig {
    pub fn words(&self, system: &SftSystem) -> Result<Vec<Word>> {
        self.segments
            .iter()
            .map(|s| {
                let symbols: Result<Vec<Symbol>> = s
                    .chars()
                    .map(|ch| {
                        ch.to_digit(10)
                            .map(|d| d as Symbol)
                            .ok_or_else(|| {
                                Error::invalid_parameter(
                                    "glue.segments",
                                    format!("non-digit symbol {ch:?}"),
                                )
                            })
                    })
                    .collect();
                system.word(symbols?)
            })
            .collect()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KatokConfig {
    pub n: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_spectral")]
    pub spectral: f64,
    #[serde(default = "default_cylinder_depth")]
    pub cylinder_depth: usize,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
}

fn default_spectral() -> f64 {
    1e-12
}
fn default_cylinder_depth() -> usize {
    12
}
fn default_truncation() -> usize {
    60
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            spectral: default_spectral(),
            cylinder_depth: default_cylinder_depth(),
            truncation: default_truncation(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        toml::from_str(text).map_err(|e| Error::invalid_parameter("config", e.to_string()))
    }

    pub fn system(&self) -> Result<SftSystem> {
        self.system
            .as_ref()
            .ok_or_else(|| Error::invalid_parameter("system", "section required"))?
            .build()
    }

    pub fn potential(&self, system: &SftSystem) -> Result<Potential> {
        match &self.potential {
            Some(p) => p.build(system),
            None => Ok(Potential::zero(system)),
        }
    }
}
