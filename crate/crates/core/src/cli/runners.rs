use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use rand::Rng;

use super::config::{Config, SweepKind};
use super::output::{num, opt, write_table, Table};
use super::Command;
use crate::error::{Error, Result};
use crate::fock::{auto_n_max, FockState};
use crate::gaussian::{GaussianState, PolarizationRotation, RotationTarget};
use crate::mc::{
    analytic_moments, calibrate_shot_noise, estimate_stokes, measure_r, mode_mismatch_sweep, rng::pulse_rng,
    simulate_ensemble, simulate_stokes_run, Basis, Calibration, Channel, Execution, Histogram,
};
use crate::plate::{
    converted_witness, mz_phase_scan, oe_delay, pairing_phase, plate_mode_phases, refractive_index, residual_phase,
    residual_witness_bound, Ray,
};
use crate::schmidt::{photons_per_mode, EntanglementReport};
use crate::stokes::{nrf, stokes_moments_gaussian, witness, StokesMoments, WITNESS_THRESHOLD};

const EXEC: Execution = Execution::Parallel;
const ORACLE_STREAM: u64 = 1 << 32;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Runs one subcommand and returns the files written.
pub fn execute(command: &Command, cfg: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    let tables = match command {
        Command::Witness => witness_tables(cfg)?,
        Command::Sweep { .. } => vec![sweep_table(cfg)?],
        Command::Entanglement => entanglement_tables(cfg)?,
        Command::Calibrate => calibration_tables(cfg)?,
        Command::Plate => vec![plate_table(cfg)?],
        Command::OracleCheck => {
            let (table, worst) = oracle_table(cfg)?;
            let path = write_table(out, command.name(), cfg, &table)?;
            if worst > cfg.oracle.tolerance {
                return Err(Error::Convergence(format!(
                    "engine and oracle differ by {worst:e} > {:e}, see {}",
                    cfg.oracle.tolerance,
                    path.display()
                )));
            }
            return Ok(vec![path]);
        }
    };
    tables.iter().map(|t| write_table(out, command.name(), cfg, t)).collect()
}

fn moments_row(label: &str, m: &StokesMoments) -> Result<Vec<String>> {
    let w = witness(m)?;
    let nrfs = [1, 2, 3].map(|k| nrf(m, k).map(num)).into_iter().collect::<Result<Vec<_>>>()?;
    let mut row = vec![label.to_string(), num(w.lhs), opt(w.stderr), opt(w.sigma_below), w.violated.to_string(), num(m.mean_s0)];
    row.extend(nrfs);
    Ok(row)
}

fn witness_tables(cfg: &Config) -> Result<Vec<Table>> {
    let exp = cfg.experiment();
    let mut t = Table::new("witness.csv", &["estimator", "lhs", "stderr", "sigma_below", "violated", "mean_s0", "nrf_s1", "nrf_s2", "nrf_s3"]);
    t.push(moments_row("analytic", &analytic_moments(&exp)?)?);
    let run = simulate_stokes_run(&exp, EXEC)?;
    t.push(moments_row("sampled", &estimate_stokes(&run, &Calibration::nominal(&exp))?)?);
    Ok(vec![t])
}

fn sweep_table(cfg: &Config) -> Result<Table> {
    let s = &cfg.sweep;
    let exp = cfg.experiment();
    match s.kind {
        SweepKind::Aperture => {
            let d1: Vec<f64> = linspace(s.d1_min_mm, s.d1_max_mm, s.points).iter().map(|d| d * 1e-3).collect();
            let pts = mode_mismatch_sweep(&exp, &cfg.geometry(), &d1, EXEC)?;
            let mut t = Table::new("sweep_aperture.csv", &["d1_mm", "ratio", "matched_fraction", "lhs", "stderr", "lhs_analytic"]);
            for p in pts {
                let analytic = analytic_moments(&crate::mc::ExperimentConfig { aperture_ratio: p.ratio, ..exp.clone() })?;
                t.push(vec![num(p.d1 * 1e3), num(p.ratio), num(p.matched_fraction), num(p.lhs), num(p.stderr), num(witness(&analytic)?.lhs)]);
            }
            Ok(t)
        }
        SweepKind::Phase => {
            let scan = mz_phase_scan(cfg.source.gamma, &linspace(0.0, TAU, s.points), &[])?;
            let mut t = Table::new("sweep_phase.csv", &["phi_rad", "nrf_s2"]);
            for p in scan.points {
                t.push(vec![num(p.phi), num(p.nrf_s2)]);
            }
            Ok(t)
        }
        SweepKind::Pathlength => {
            let offsets: Vec<f64> = linspace(-s.path_max_mm, s.path_max_mm, s.points).iter().map(|d| d * 1e-3).collect();
            let scan = mz_phase_scan(cfg.source.gamma, &[], &offsets)?;
            let mut t = Table::new("sweep_pathlength.csv", &["path_offset_mm", "visibility", "nrf_min", "nrf_max"]);
            for e in scan.envelope {
                t.push(vec![num(e.path_offset * 1e3), num(e.visibility), num(e.nrf_min), num(e.nrf_max)]);
            }
            Ok(t)
        }
        SweepKind::Efficiency => {
            let mut t = Table::new("sweep_efficiency.csv", &["eta", "lhs_analytic", "lhs", "stderr"]);
            for eta in linspace(s.eta_min, s.eta_max, s.points) {
                let point = exp.clone().with_uniform_eta(eta);
                let analytic = witness(&analytic_moments(&point)?).map(|w| w.lhs).unwrap_or(f64::NAN);
                let sampled = simulate_stokes_run(&point, EXEC)
                    .and_then(|run| estimate_stokes(&run, &Calibration::nominal(&point)))
                    .and_then(|m| witness(&m));
                let (lhs, se) = match sampled {
                    Ok(w) => (w.lhs, w.stderr.unwrap_or(f64::NAN)),
                    Err(Error::UndefinedWitness) => (f64::NAN, f64::NAN),
                    Err(e) => return Err(e),
                };
                t.push(vec![num(eta), num(analytic), num(lhs), num(se)]);
            }
            Ok(t)
        }
    }
}

fn histogram_table(file: &str, h: &Histogram) -> Table {
    let mut t = Table::new(file, &["bin_low", "bin_high", "count"]);
    let edges = h.edges();
    for (i, c) in h.counts.iter().enumerate() {
        t.push(vec![num(edges[i]), num(edges[i + 1]), c.to_string()]);
    }
    t
}

fn entanglement_tables(cfg: &Config) -> Result<Vec<Table>> {
    let exp = cfg.experiment();
    let target: Channel = cfg.entanglement.target.parse()?;
    let herald: Channel = cfg.entanglement.herald.parse()?;
    let e = exp.eta;
    let eta = match target {
        Channel::AH => e[0],
        Channel::AV => e[1],
        Channel::BH => e[2],
        Channel::BV => e[3],
        Channel::BeamA => 0.5 * (e[0] + e[1]),
        Channel::BeamB => 0.5 * (e[2] + e[3]),
    };
    let report = EntanglementReport::compute(exp.gamma, exp.n_pairs, eta)?;
    let ensemble = simulate_ensemble(&exp, Basis::S1, EXEC)?;
    let half_width = (cfg.entanglement.half_width > 0).then_some(cfg.entanglement.half_width);
    let w = measure_r(&ensemble, &exp, target, herald, half_width, EXEC)?;
    let summary = Table::key_values(
        "entanglement.csv",
        vec![
            ("photons_per_mode", num(photons_per_mode(exp.gamma))),
            ("mean_photons_per_beam", num(report.mean_photons)),
            ("eta_target", num(eta)),
            ("k_single", num(report.k_single)),
            ("ln_k_product", num(report.ln_k_product)),
            ("k_product", opt(report.k_product)),
            ("k_poisson", num(report.k_poisson)),
            ("k_asymptotic", num(report.k_asymptotic)),
            ("r_ideal", num(report.r_ideal)),
            ("r_eta", num(report.r_eta)),
            ("r_measured", num(w.r)),
            ("r_eta_band_low", num(0.95 * report.r_eta)),
            ("r_eta_band_high", num(1.05 * report.r_eta)),
            ("fwhm_unconditional", num(w.fwhm_unconditional)),
            ("fwhm_conditional", num(w.fwhm_conditional)),
            ("poisson_reference", w.poisson_reference.to_string()),
            ("herald_center", w.center.to_string()),
            ("herald_half_width", w.half_width.to_string()),
            ("herald_slope", num(w.slope)),
            ("selected_pulses", w.selected.to_string()),
            ("low_count_warning", w.low_count.to_string()),
        ],
    );
    Ok(vec![
        summary,
        histogram_table("entanglement_unconditional.csv", &w.unconditional),
        histogram_table("entanglement_conditional.csv", &w.conditional),
    ])
}

fn calibration_tables(cfg: &Config) -> Result<Vec<Table>> {
    let exp = cfg.experiment();
    let fit = calibrate_shot_noise(&exp, &cfg.calibration.levels, EXEC)?;
    let mut points = Table::new("calibration.csv", &["level", "mean_sum", "var_diff", "var_diff_stderr", "residual"]);
    for p in &fit.points {
        points.push(vec![num(p.level), num(p.mean_sum), num(p.var_diff), num(p.var_diff_stderr), num(p.residual)]);
    }
    let summary = Table::key_values(
        "calibration_fit.csv",
        vec![
            ("alpha", num(fit.alpha)),
            ("alpha_stderr", num(fit.alpha_stderr)),
            ("intercept", num(fit.intercept)),
            ("intercept_stderr", num(fit.intercept_stderr)),
            ("intercept_nominal", num(Calibration::nominal(&exp).electronic_var)),
        ],
    );
    Ok(vec![points, summary])
}

fn plate_table(cfg: &Config) -> Result<Table> {
    let spec = cfg.plate_spec();
    let phases = plate_mode_phases(&spec)?;
    let delay_a = oe_delay(&spec, spec.lambda_a)?;
    let delay_b = oe_delay(&spec, spec.lambda_b)?;
    let residual = residual_phase(&spec)?;
    let gamma = cfg.source.gamma;
    Ok(Table::key_values(
        "plate.csv",
        vec![
            ("material", spec.material.name.to_string()),
            ("n_o_a", num(refractive_index(spec.lambda_a, Ray::Ordinary)?)),
            ("n_e_a", num(refractive_index(spec.lambda_a, Ray::Extraordinary)?)),
            ("n_o_b", num(refractive_index(spec.lambda_b, Ray::Ordinary)?)),
            ("n_e_b", num(refractive_index(spec.lambda_b, Ray::Extraordinary)?)),
            ("oe_delay_a_over_pi", num(delay_a / PI)),
            ("oe_delay_b_over_pi", num(delay_b / PI)),
            ("delay_difference_over_pi", num((delay_a - delay_b) / PI)),
            ("pairing_phase_over_pi", num(pairing_phase(&phases) / PI)),
            ("residual_over_pi", num(residual / PI)),
            ("converted_lhs", num(converted_witness(&spec, gamma)?)),
            ("residual_bound_008pi", num(residual_witness_bound(gamma, 0.08 * PI))),
            ("witness_threshold", num(WITNESS_THRESHOLD)),
        ],
    ))
}

fn random_rotation<R: Rng>(rng: &mut R) -> PolarizationRotation {
    let target = [RotationTarget::A, RotationTarget::B, RotationTarget::Both][rng.random_range(0..3)];
    PolarizationRotation::from_angles(
        rng.random_range(-PI..PI),
        rng.random_range(-PI..PI),
        rng.random_range(-PI..PI),
        rng.random_range(0.0..PI),
        target,
    )
}

fn oracle_table(cfg: &Config) -> Result<(Table, f64)> {
    let mut t = Table::new("oracle_check.csv", &["gamma", "state", "rotation", "n_max", "quantity", "engine", "oracle", "abs_diff"]);
    let mut rng = pulse_rng(cfg.run.seed, ORACLE_STREAM, 0);
    let mut rotations = vec![("identity".to_string(), PolarizationRotation::identity(RotationTarget::Both))];
    for i in 0..cfg.oracle.rotations {
        rotations.push((format!("random_{i}"), random_rotation(&mut rng)));
    }
    let mut worst: f64 = 0.0;
    for &gamma in &cfg.oracle.gammas {
        let n_max = auto_n_max(gamma, 1e-13).max(2);
        let states: [(&str, GaussianState, FockState); 3] = [
            ("singlet", GaussianState::make_singlet(gamma)?, FockState::build_singlet(gamma, n_max)?),
            ("phi_plus", GaussianState::make_phi_state(gamma, 0.0)?, FockState::build_phi_state(gamma, 0.0, n_max)?),
            ("phi_minus", GaussianState::make_phi_state(gamma, PI)?, FockState::build_phi_state(gamma, PI, n_max)?),
        ];
        for (name, engine, oracle) in &states {
            for (rot_name, rot) in &rotations {
                let a = stokes_moments_gaussian(&engine.apply_rotation(rot)?);
                let b = oracle.apply_rotation_fock(rot)?.stokes_moments_exact();
                let quantities = [
                    ("mean_s0", a.mean_s0, b.mean_s0),
                    ("mean_s1", a.mean[0], b.mean[0]),
                    ("mean_s2", a.mean[1], b.mean[1]),
                    ("mean_s3", a.mean[2], b.mean[2]),
                    ("var_s1", a.var[0], b.var[0]),
                    ("var_s2", a.var[1], b.var[1]),
                    ("var_s3", a.var[2], b.var[2]),
                ];
                for (q, x, y) in quantities {
                    let d = (x - y).abs();
                    worst = worst.max(d);
                    t.push(vec![num(gamma), name.to_string(), rot_name.clone(), n_max.to_string(), q.to_string(), num(x), num(y), num(d)]);
                }
            }
        }
    }
    Ok((t, worst))
}
