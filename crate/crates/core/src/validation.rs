//! Fast self-checks for an installed build.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytics::{ergodic_rate_closed_form, ergodic_rate_quadrature, exp_integral_e1, meijer_log_gamma, GainDistribution, RateInputs};
use crate::channel::gaussian_matrix;
use crate::harness::{preset, read_csv, run_sweep_with_workers, write_csv, Scheme};
use crate::irs::{kkt_residual, solve_constrained_ls, VectorizedProblem, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::linalg::CMatrix;
use crate::precoding::build_outer_precoder;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

type CheckFn = fn() -> Result<Check>;

/// Runs every check; errors inside a check are reported as failures.
pub fn run_checks() -> Vec<Check> {
    let suite: [(&'static str, CheckFn); 6] = [
        ("precoder nulling", precoder_nulling),
        ("closed form vs quadrature", closed_form),
        ("special functions", special_functions),
        ("reflection solver", reflection_solver),
        ("worker determinism", determinism),
        ("csv round trip", csv_round_trip),
    ];
    suite
        .into_iter()
        .map(|(name, f)| f().unwrap_or_else(|e| check(name, false, e.to_string())))
        .collect()
}

fn precoder_nulling() -> Result<Check> {
    let config = preset("fig4")?;
    let prepared = config.prepare()?;
    let decomps = &prepared.dual.decomps;
    let mut worst: f64 = 0.0;
    for k in 0..decomps.len() {
        let p = build_outer_precoder(decomps, k, config.streams)?;
        let w = p.matrix.ncols();
        worst = worst.max((p.matrix.adjoint() * &p.matrix - CMatrix::identity(w, w)).norm());
        for (j, d) in decomps.iter().enumerate() {
            if j != k {
                worst = worst.max((d.colouring().adjoint() * &p.matrix).norm());
            }
        }
    }
    Ok(check("precoder nulling", worst < 1e-10, format!("max deviation {worst:.2e}")))
}

fn closed_form() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for (kappa, chi, snr, a_bar, a_tilde) in [(1, 0.5, 10.0, 0.2, 0.05), (2, 0.05, 1000.0, 0.35, 0.0), (3, 1.0, 100.0, 0.4, 0.01)] {
        let inputs = RateInputs::new(a_bar * snr, a_tilde * snr, GainDistribution::new(kappa, 0.7, chi)?)?;
        let cf = ergodic_rate_closed_form(&inputs)?;
        let q = ergodic_rate_quadrature(&inputs)?;
        worst = worst.max((cf - q).abs() / q.abs());
    }
    Ok(check("closed form vs quadrature", worst < 1e-6, format!("worst relative gap {worst:.2e}")))
}

fn special_functions() -> Result<Check> {
    let g2 = meijer_log_gamma(2, 1.0)?;
    let g1 = meijer_log_gamma(1, 1.0)?;
    let e1 = std::f64::consts::E * exp_integral_e1(1.0)?;
    let passed = (g2 - 1.0).abs() < 1e-12 && (g1 - e1).abs() < 1e-12;
    Ok(check("special functions", passed, format!("G(2,1) = {g2:.15}, G(1,1) = {g1:.15}")))
}

fn reflection_solver() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let rows = rng.random_range(2..=24);
        let cols = 2 * rng.random_range(4..=60);
        let k = gaussian_matrix(&mut rng, rows, cols, 1.0);
        let d = gaussian_matrix(&mut rng, rows, 1, 4.0 * cols as f64).column(0).into_owned();
        let p = VectorizedProblem::new(k, d);
        let sol = solve_constrained_ls(&p, DEFAULT_TOL, DEFAULT_MAX_ITER);
        worst = worst.max(kkt_residual(&p, &sol.theta));
    }
    Ok(check("reflection solver", worst <= DEFAULT_TOL, format!("worst KKT residual {worst:.2e}")))
}

fn small_config() -> Result<crate::harness::SimConfig> {
    let mut c = preset("fig8")?;
    c.irs_elements = vec![20];
    c.snr_db = vec![10.0];
    c.xi = vec![0.005];
    c.trials = 8;
    c.schemes = vec![Scheme::IrsNoma, Scheme::Oma, Scheme::NomaSinglePol, Scheme::NomaDualPol];
    Ok(c)
}

fn determinism() -> Result<Check> {
    let c = small_config()?;
    let a = run_sweep_with_workers(&c, 1)?;
    let b = run_sweep_with_workers(&c, 3)?;
    let worst = a
        .iter()
        .zip(&b)
        .flat_map(|(x, y)| x.user_rates.iter().zip(&y.user_rates).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    Ok(check("worker determinism", a.len() == b.len() && worst <= 1e-12, format!("{} records, max difference {worst:.1e}", a.len())))
}

fn csv_round_trip() -> Result<Check> {
    let records = run_sweep_with_workers(&small_config()?, 1)?;
    let mut first = Vec::new();
    write_csv(&records, &mut first)?;
    let mut second = Vec::new();
    write_csv(&read_csv(first.as_slice())?, &mut second)?;
    Ok(check("csv round trip", first == second, format!("{} bytes", first.len())))
}
