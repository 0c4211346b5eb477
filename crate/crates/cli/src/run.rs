//! Command dispatch: each command validates its section, runs the
//! corresponding core operations deterministically under the master seed,
//! and returns a table plus the constants recorded in the sidecar.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thermoform::maps::estimate_expansion_constant;
use thermoform::*;

use crate::config::{Command, Config};
use crate::output::{fmt_f64, Constants, RunOutput, Table};

pub fn run(config: &Config, seed: u64, spectral_tol: f64) -> Result<RunOutput> {
    match config.command {
        Command::Pressure => run_pressure(config),
        Command::Equilibrium => run_equilibrium(config, spectral_tol),
        Command::GibbsCheck => run_gibbs_check(config),
        Command::HypTimes => run_hyp_times(config, seed),
        Command::ZoomTimes => run_zoom_times(config, seed),
        Command::Skew => run_skew(config),
        Command::Ldp => run_ldp(config),
        Command::Glue => run_glue(config),
        Command::Katok => run_katok(config),
    }
}

/// Orbit seed for stream `k` of the master seed.
fn orbit_seed(master: u64, stream: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.random_range(0.0..1.0)
}

fn run_pressure(config: &Config) -> Result<RunOutput> {
    let system = config.system()?;
    let potential = config.potential(&system)?;
    let section = config.pressure.as_ref();
    let mode = match section.map(|p| p.mode.as_str()).unwrap_or("spectral") {
        "spectral" => PressureMode::Spectral,
        "finite-n" => {
            let p = section.unwrap();
            PressureMode::FiniteN {
                n: p.n.ok_or_else(|| {
                    Error::invalid_parameter("pressure.n", "required for finite-n mode")
                })?,
                epsilon: p.epsilon.unwrap_or(1.0),
            }
        }
        other => {
            return Err(Error::invalid_parameter(
                "pressure.mode",
                format!("unknown mode {other:?} (spectral | finite-n)"),
            ))
        }
    };
    let estimate = pressure(&system, &potential, mode)?;
    let mut table = Table::new(vec![
        "mode",
        "pressure_nats",
        "bracket_lo_nats",
        "bracket_hi_nats",
    ]);
    let (lo, hi) = match estimate.bracket {
        Some((lo, hi)) => (fmt_f64(lo), fmt_f64(hi)),
        None => (String::new(), String::new()),
    };
    let mode_name = match mode {
        PressureMode::Spectral => "spectral".to_string(),
        PressureMode::FiniteN { n, epsilon } => format!("finite-n(n={n};eps={epsilon})"),
    };
    table.push(vec![mode_name, fmt_f64(estimate.value), lo, hi]);
    let mut constants = Constants::default();
    constants.put_f64("pressure_nats", estimate.value);
    Ok(RunOutput { table, constants })
}

fn run_equilibrium(config: &Config, spectral_tol: f64) -> Result<RunOutput> {
    let system = config.system()?;
    let potential = config.potential(&system)?;
    let matrix = transfer_matrix(&system, &potential)?;
    let data = perron(&matrix, spectral_tol)?;
    let mu = equilibrium_measure(&system, &potential)?;
    let mut table = Table::new(vec![
        "state_word",
        "eigenmeasure_weight",
        "eigenfunction_value",
        "stationary_mass",
    ]);
    for (i, state) in matrix.state_words().iter().enumerate() {
        let word: String = state.iter().map(|s| s.to_string()).collect();
        table.push(vec![
            word,
            fmt_f64(data.nu_weights[i]),
            fmt_f64(data.h[i]),
            fmt_f64(mu.weight(state)),
        ]);
    }
    let (h_min, h_max) = data.h_bounds();
    let mut constants = Constants::default();
    constants.put_f64("lambda", data.lambda);
    constants.put_f64("pressure_nats", data.lambda.ln());
    constants.put_f64("solver_residual", data.residual);
    constants.put_f64("density_min", h_min);
    constants.put_f64("density_max", h_max);
    constants.put_f64("equivalence_constant", h_max / h_min);
    Ok(RunOutput { table, constants })
}

fn run_gibbs_check(config: &Config) -> Result<RunOutput> {
    let system = config.system()?;
    let potential = config.potential(&system)?;
    let section = config
        .gibbs
        .as_ref()
        .ok_or_else(|| Error::invalid_parameter("gibbs", "section required"))?;
    let p = match section.pressure {
        Some(p) => p,
        None => pressure(&system, &potential, PressureMode::Spectral)?.value,
    };
    let mu = equilibrium_measure(&system, &potential)?;
    let rows = gibbs_scan(
        &system,
        &mu,
        &potential,
        p,
        section.n_min,
        section.n_max,
        section.epsilon,
    )?;
    let mut table = Table::new(vec![
        "time_n",
        "min_log_ratio",
        "max_log_ratio",
        "k_lower",
        "k_upper",
    ]);
    let mut k_upper = f64::NEG_INFINITY;
    let mut k_lower = f64::INFINITY;
    for row in &rows {
        k_upper = k_upper.max(row.max_log_ratio);
        k_lower = k_lower.min(row.min_log_ratio);
        table.push(vec![
            row.time.to_string(),
            fmt_f64(row.min_log_ratio),
            fmt_f64(row.max_log_ratio),
            fmt_f64(row.min_log_ratio.exp()),
            fmt_f64(row.max_log_ratio.exp()),
        ]);
    }
    let mut constants = Constants::default();
    constants.put_f64("pressure_nats", p);
    constants.put(
        "pressure_source",
        if section.pressure.is_some() {
            "config-override"
        } else {
            "spectral"
        },
    );
    constants.put_f64("epsilon", section.epsilon);
    constants.put_f64("k_upper", k_upper.exp());
    constants.put_f64("k_lower", k_lower.exp());
    Ok(RunOutput { table, constants })
}

fn run_hyp_times(config: &Config, seed: u64) -> Result<RunOutput> {
    let map_cfg = config
        .map
        .as_ref()
        .ok_or_else(|| Error::invalid_parameter("map", "section required"))?;
    let section = config
        .hyp_times
        .as_ref()
        .ok_or_else(|| Error::invalid_parameter("hyp_times", "section required"))?;
    let (map, _model) = make_map(map_cfg.build()?)?;
    let (c, c_source) = match section.c {
        Some(c) => (c, "config".to_string()),
        None => match map.default_expansion_constant() {
            Some(c) => (c, "map-default".to_string()),
            None => {
                let burn_seed = orbit_seed(seed, u64::MAX);
                let c = estimate_expansion_constant(&map, burn_seed, section.burn_in)?;
                (c, format!("burn-in({})", section.burn_in))
            }
        },
    };
    let mut table = Table::new(vec![
        "seed_index",
        "seed_value",
        "trace_length",
        "detected_times",
        "frequency",
        "tail_max_gap_ratio",
    ]);
    for k in 0..section.seeds {
        let x0 = orbit_seed(seed, k as u64);
        let trace = iterate_orbit(&map, x0, section.length)?;
        let series = hyperbolic_times(&trace, c)?;
        table.push(vec![
            k.to_string(),
            fmt_f64(x0),
            section.length.to_string(),
            series.times().len().to_string(),
            fmt_f64(series.frequency),
            fmt_f64(series.max_gap_ratio),
        ]);
    }
    let mut constants = Constants::default();
    constants.put_f64("expansion_constant_c", c);
    constants.put("expansion_constant_source", c_source);
    Ok(RunOutput { table, constants })
}

fn run_zoom_times(config: &Config, seed: u64) -> Result<RunOutput> {
    let map_cfg = config
        .map
        .as_ref()
        .ok_or_else(|| Error::invalid_parameter("map", "section required"))?;
    let section = config
        .zoom_times
        .as_ref()
        .ok_or_else(|| Error::invalid_parameter("zoom_times", "section required"))?;
    let (map, _model) = make_map(map_cfg.build()?)?;
    let zoom = match section.zoom.as_str() {
        "geometric" => ZoomSequence::geometric(section.rate.ok_or_else(|| {
            Error::invalid_parameter("zoom_times.rate", "required for geometric zoom")
        })?),
        "shift-metric" => ZoomSequence::shift_metric(),
        other => {
            return Err(Error::invalid_parameter(
                "zoom_times.zoom",
                format!("unknown family {other:?} (geometric | shift-metric)"),
            ))
        }
    };
    let mut table = Table::new(vec![
        "seed_index",
        "seed_value",
        "trace_length",
        "detected_times",
        "frequency",
    ]);
    for k in 0..section.seeds {
        let x0 = orbit_seed(seed, k as u64);
        let trace = iterate_orbit(&map, x0, section.length)?;
        let series = zooming_times(&map, &trace, &zoom, section.delta)?;
        table.push(vec![
            k.to_string(),
            fmt_f64(x0),
            section.length.to_string(),
            series.times().len().to_string(),
            fmt_f64(series.frequency),
        ]);
    }
    let mut constants = Constants::default();
    constants.put_f64("delta", section.delta);
    constants.put("zoom_family", zoom.description.clone());
    Ok(RunOutput { table, constants })
}

fn run_skew(config: &Config) -> Result<RunOutput> {
    let system = match &config.system {
        Some(s) => s.build()?,
        None => SftSystem::full_shift(2),
    };
    let section = config
        .skew
        .as_ref()
        .ok_or_else(|| Error::invalid_parameter("skew", "section required"))?;
    let base_part = config.potential(&system)?;
    let skew = SkewSystem::new(
        system.clone(),
        section.rate,
        section.translations.clone(),
        section.diameter,
    )?;
    let phi = FiberPotential::linear_fiber(base_part.clone(), section.fiber_coef, section.diameter);
    let j = section.truncation.unwrap_or(config.tolerances.truncation);
    let induced = induce_base_potential(&skew, &phi, j)?;
    let report = pressure_equality_check(&skew, &phi, &induced, section.n, section.epsilon, section.fiber_depth)?;
    let mu = equilibrium_measure(&system, &base_part)?;
    let lifted = lift_measure(&skew, &mu)?;
    let p = pressure(&system, &base_part, PressureMode::Spectral)?.value;
    let words: Vec<Word> = system.words(section.n + 1).collect();
    let stride = (words.len() / section.samples.max(1)).max(1);
    let samples: Vec<(Word, usize)> = words
        .into_iter()
        .step_by(stride)
        .take(section.samples)
        .map(|w| (w, section.n))
        .collect();
    let gibbs = attractor_gibbs_report(
        &skew,
        &phi,
        &induced,
        &lifted,
        p,
        &samples,
        section.epsilon,
        section.fiber_depth,
    )?;
    let mut table = Table::new(vec!["quantity", "value"]);
    let (base_lo, base_hi) = report.base.bracket.unwrap();
    let (attr_lo, attr_hi) = report.attractor.bracket.unwrap();
    let rows = [
        ("truncation_tail", induced.tail),
        ("transfer_sup_bound", induced.u_sup_bound),
        ("fiber_spread", induced.max_fiber_spread),
        ("base_pressure_estimate_nats", report.base.value),
        ("base_bracket_lo_nats", base_lo),
        ("base_bracket_hi_nats", base_hi),
        ("attractor_pressure_estimate_nats", report.attractor.value),
        ("attractor_bracket_lo_nats", attr_lo),
        ("attractor_bracket_hi_nats", attr_hi),
        ("brackets_overlap", f64::from(u8::from(report.overlap))),
        ("max_ratio_difference", gibbs.max_abs_diff),
        ("ratio_comparison_bound", gibbs.comparison_bound),
    ];
    for (name, value) in rows {
        table.push(vec![name.to_string(), fmt_f64(value)]);
    }
    let mut constants = Constants::default();
    constants.put("truncation_terms", j.to_string());
    constants.put_f64("truncation_tail", induced.tail);
    constants.put_f64("transfer_sup_bound", induced.u_sup_bound);
    constants.put_f64("base_pressure_nats", p);
    constants.put_f64("holonomy_constant", skew.holonomy_constant());
    Ok(RunOutput { table, constants })
}

fn run_ldp(config: &Config) -> Result<RunOutput> {
    let system = config.system()?;
    let potential = config.potential(&system)?;
    let section = config
        .ldp
        .as_ref()
        .ok_or_else(|| Error::invalid_parameter("ldp", "section required"))?;
    let psi = RationalObservable::indicator(&system, section.psi_symbol)?;
    let psi_pot = psi.to_potential(&system)?;
    let c = section.level()?;
    let c_f = *c.numer() as f64 / *c.denom() as f64;
    let steps = section.t_steps.max(2);
    let grid: Vec<f64> = (0..=steps)
        .map(|i| i as f64 * section.t_max / steps as f64)
        .collect();
    let curve = pressure_curve(&system, &potential, &psi_pot, &grid)?;
    let rate = curve.rate(c_f)?;
    let mu = equilibrium_measure(&system, &potential)?;
    let mut table = Table::new(vec![
        "n_steps",
        "deviation_probability",
        "minus_log_prob_over_n",
        "legendre_rate_nats",
    ]);
    for &n in &section.n_values {
        let prob = deviation_prob_exact(&system, &mu, &psi, c, n, true)?;
        let decay = if prob > 0.0 {
            -prob.ln() / n as f64
        } else {
            f64::INFINITY
        };
        table.push(vec![
            n.to_string(),
            fmt_f64(prob),
            fmt_f64(decay),
            fmt_f64(rate.value),
        ]);
    }
    let mut constants = Constants::default();
    constants.put_f64("pressure_nats", curve.p0);
    constants.put_f64("legendre_rate_nats", rate.value);
    constants.put_f64("legendre_argmin_t", rate.t_star);
    constants.put("deviation_level", format!("{}/{}", c.numer(), c.denom()));
    Ok(RunOutput { table, constants })
}

fn run_glue(config: &Config) -> Result<RunOutput> {
    let system = config.system()?;
    let section = config
        .glue
        .as_ref()
        .ok_or_else(|| Error::invalid_parameter("glue", "section required"))?;
    let segments = section.words(&system)?;
    let result = glue_segments(&system, &segments)?;
    let mut table = Table::new(vec!["segment_index", "segment_word", "connector_length_after"]);
    for (i, seg) in segments.iter().enumerate() {
        let connector = result
            .connectors
            .get(i)
            .map(|c| c.to_string())
            .unwrap_or_default();
        table.push(vec![i.to_string(), seg.display(), connector]);
    }
    let mut constants = Constants::default();
    constants.put("glued_word", result.word.display());
    constants.put("connector_bound", result.connector_bound.to_string());
    Ok(RunOutput { table, constants })
}

fn run_katok(config: &Config) -> Result<RunOutput> {
    let system = config.system()?;
    let potential = config.potential(&system)?;
    let section = config
        .katok
        .as_ref()
        .ok_or_else(|| Error::invalid_parameter("katok", "section required"))?;
    let mu = equilibrium_measure(&system, &potential)?;
    let estimate = katok_entropy(&system, &mu, section.n, section.epsilon, section.rho)?;
    let mut table = Table::new(vec![
        "n_steps",
        "epsilon",
        "rho",
        "entropy_estimate_nats_per_step",
        "log_ball_count_nats",
        "covered_mass",
        "mode",
    ]);
    table.push(vec![
        section.n.to_string(),
        fmt_f64(section.epsilon),
        fmt_f64(section.rho),
        fmt_f64(estimate.value),
        fmt_f64(estimate.log_count),
        fmt_f64(estimate.covered_mass),
        estimate.mode.to_string(),
    ]);
    let mut constants = Constants::default();
    constants.put_f64("entropy_estimate_nats_per_step", estimate.value);
    constants.put("count_mode", estimate.mode);
    Ok(RunOutput { table, constants })
}
