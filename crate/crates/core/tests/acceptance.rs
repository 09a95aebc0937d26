//! Acceptance suite: each test prints one `criterion N ... PASS|FAIL` line.

use std::time::Instant;

use polarirs::analytics::{
    ergodic_rate_closed_form, ergodic_rate_quadrature, exp_integral_e1, ks_pvalue, ks_statistic, meijer_log_gamma, GainDistribution,
    RateInputs,
};
use polarirs::channel::{draw_realization, gaussian_matrix, ChannelDims, LinkGains, Substreams};
use polarirs::harness::{analytic_records, preset, run_sweep_with_workers, Prepared, RateRecord, Scheme, SimConfig};
use polarirs::irs::{kkt_residual, project_unit_disc, solve_constrained_ls, solve_min_norm_ls, vectorize, VectorizedProblem, DEFAULT_MAX_ITER, DEFAULT_TOL};
use polarirs::linalg::{CMatrix, CVector, C64};
use polarirs::precoding::{build_outer_precoder, Polarization};
use polarirs::quadrature::tanh_sinh_semi_infinite;
use polarirs::scenario::{dual_polarized_trial, dual_polarized_user, GroupParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, title: &str, pass: bool, detail: impl AsRef<str>) {
    println!("criterion {id:>2} {title}: {} [{}]", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    assert!(pass, "criterion {id} failed: {}", detail.as_ref());
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn find(records: &[RateRecord], scheme: Scheme, elements: usize, snr_db: f64) -> &RateRecord {
    records
        .iter()
        .find(|r| r.scheme == scheme && r.elements == elements && r.snr_db == snr_db)
        .expect("grid point present")
}

fn group_params(config: &SimConfig, prepared: &Prepared, rx: usize, elements: usize, chi: f64) -> GroupParams {
    GroupParams {
        rx,
        elements,
        group: config.group,
        users: config.link_gains(chi).unwrap(),
        assignment: prepared.assignment.clone(),
        alloc: prepared.alloc.clone(),
        solver: config.solver,
    }
}

#[test]
fn criterion_01_closed_form_matches_quadrature() {
    let config = preset("fig6").unwrap();
    let prepared = config.prepare().unwrap();
    let a = &prepared.assignment;
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for snr_db in [0.0, 10.0, 20.0, 30.0] {
        let snr = 10f64.powf(snr_db / 10.0);
        for kappa in 1..=3u32 {
            for chi in [0.05, 0.5, 1.0] {
                for (u, g) in config.link_gains(chi).unwrap().iter().enumerate() {
                    let lambda = 1.0 / (g.zeta_bs_u * prepared.dual.diagonal(config.group));
                    let dist = GainDistribution::new(kappa, lambda, chi).unwrap();
                    let subset = a.subset(a.polarization_of(u).unwrap());
                    for xi in [0.0, 0.005, 0.01] {
                        let inputs = RateInputs::for_user(&prepared.alloc, subset, u, xi, snr, dist).unwrap();
                        let cf = ergodic_rate_closed_form(&inputs).unwrap();
                        let q = ergodic_rate_quadrature(&inputs).unwrap();
                        worst = worst.max(rel(cf, q));
                        cases += 1;
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "closed form vs quadrature",
        worst < 1e-6 && secs < 10.0,
        format!("{cases} cases, worst relative gap {worst:.2e}, {secs:.2} s"),
    );
}

#[test]
fn criterion_02_large_surface_approaches_closed_form() {
    let mut config = preset("fig4").unwrap();
    config.irs_elements = vec![80, 500];
    config.snr_db = vec![10.0, 20.0, 30.0];
    config.trials = 200;
    config.trials_by_elements.clear();
    config.schemes = vec![Scheme::IrsNoma];
    let sim = run_sweep_with_workers(&config, polarirs::harness::workers_from_env().unwrap()).unwrap();
    let theory = analytic_records(&config).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for snr in [10.0, 20.0, 30.0] {
        let s = find(&sim, Scheme::IrsNoma, 500, snr).sum_rate;
        let t = find(&theory, Scheme::Analytic, 500, snr).sum_rate;
        pass &= rel(s, t) <= 0.05;
        detail.push(format!("L=500 {snr} dB sim {s:.3} vs {t:.3} ({:+.1}%)", 100.0 * (s - t) / t));
    }
    let s80 = find(&sim, Scheme::IrsNoma, 80, 30.0).sum_rate;
    let t80 = find(&theory, Scheme::Analytic, 80, 30.0).sum_rate;
    pass &= s80 < t80;
    detail.push(format!("L=80 30 dB sim {s80:.3} < {t80:.3}"));
    report(2, "large-L convergence to closed form", pass, detail.join("; "));
}

#[test]
fn criterion_03_user_rate_reference_points() {
    let config = preset("fig6").unwrap();
    let prepared = config.prepare().unwrap();
    let a = &prepared.assignment;
    let user = 2;
    let subset = a.subset(a.polarization_of(user).unwrap()).to_vec();
    let snr = 1000.0;
    let trials = 200u64;
    let mut pass = true;
    let mut detail = Vec::new();
    for (chi, target) in [(0.05, 8.44), (1.0, 9.42)] {
        let g = config.link_gains(chi).unwrap()[user];
        let dist = prepared.dual.gain_distribution(config.group, g.zeta_bs_u, 4, chi).unwrap();
        let analytic = ergodic_rate_closed_form(&RateInputs::for_user(&prepared.alloc, &subset, user, 0.0, snr, dist).unwrap()).unwrap();
        let params = group_params(&config, &prepared, 4, 500, chi);
        let mc = (0..trials)
            .map(|t| {
                let o = dual_polarized_user(&prepared.dual, &params, config.seed, t, user, true).unwrap();
                polarirs::scenario::noma_rate(&o, &prepared.alloc, &subset, user, 0.0, snr, true).unwrap()
            })
            .sum::<f64>()
            / trials as f64;
        pass &= rel(analytic, target) <= 0.05 && rel(mc, target) <= 0.07;
        detail.push(format!(
            "χ={chi}: closed form {analytic:.3} ({:+.1}%), Monte Carlo {mc:.3} ({:+.1}%) vs {target}",
            100.0 * (analytic - target) / target,
            100.0 * (mc - target) / target
        ));
    }
    report(3, "user-3 rate at 30 dB", pass, detail.join("; "));
}

#[test]
fn criterion_04_scheme_comparison_point() {
    let mut config = preset("fig8").unwrap();
    config.irs_elements = vec![100];
    config.snr_db = vec![18.0];
    config.xi = vec![0.005];
    let records = run_sweep_with_workers(&config, polarirs::harness::workers_from_env().unwrap()).unwrap();
    let irs = find(&records, Scheme::IrsNoma, 100, 18.0).sum_rate;
    let oma = find(&records, Scheme::Oma, 100, 18.0).sum_rate;
    let noma = find(&records, Scheme::NomaSinglePol, 100, 18.0).sum_rate;
    let pass = rel(irs, 9.81) <= 0.05 && ((irs - oma) - 3.86).abs() <= 0.75 && ((irs - noma) - 4.17).abs() <= 0.75;
    report(
        4,
        "imperfect-SIC comparison at 18 dB",
        pass,
        format!(
            "IRS {irs:.3} vs 9.81 ({:+.1}%); gap over OMA {:.3} vs 3.86; gap over single-pol NOMA {:.3} vs 4.17",
            100.0 * (irs - 9.81) / 9.81,
            irs - oma,
            irs - noma
        ),
    );
}

#[test]
fn criterion_05_sic_error_saturation() {
    let mut config = preset("fig5").unwrap();
    config.snr_db = vec![35.0, 45.0];
    config.xi = vec![0.005, 0.01];
    let records = analytic_records(&config).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for &rx in &config.rx_antennas {
        for &xi in &config.xi {
            let at = |snr: f64| records.iter().find(|r| r.rx == rx && r.xi == xi && r.snr_db == snr).unwrap().sum_rate;
            let diff = at(45.0) - at(35.0);
            pass &= diff.abs() < 0.1;
            detail.push(format!("N={rx} ξ={xi}: {:.3} → {:.3} (Δ {diff:.3})", at(35.0), at(45.0)));
        }
    }
    report(5, "sum-rate saturation 35→45 dB", pass, detail.join("; "));
}

#[test]
fn criterion_06_reflection_shrinks_with_surface_size() {
    let config = preset("fig4").unwrap();
    let prepared = config.prepare().unwrap();
    let sizes = [50usize, 100, 200, 400];
    let seeds = 20u64;
    let user = 2;
    let gains = config.link_gains(0.5).unwrap()[user];
    let serving = prepared.assignment.polarization_of(user).unwrap();
    let rank = prepared.dual.rank();

    // (a) median peak magnitude of the unconstrained minimum-norm solution.
    let medians: Vec<f64> = sizes
        .iter()
        .map(|&l| {
            let mut peaks: Vec<f64> = (0..seeds)
                .map(|s| {
                    let dims = ChannelDims { rank, rx: 4, elements: l };
                    let real = draw_realization(dims, gains, &Substreams::new(s, 0, user as u64)).unwrap();
                    vectorize(&real, serving)
                        .iter()
                        .map(|p| solve_min_norm_ls(p).theta.iter().map(|z| z.norm()).fold(0.0, f64::max))
                        .fold(0.0, f64::max)
                })
                .collect();
            peaks.sort_by(f64::total_cmp);
            0.5 * (peaks[peaks.len() / 2 - 1] + peaks[peaks.len() / 2])
        })
        .collect();
    let a_pass = medians.windows(2).all(|w| w[1] < w[0]);

    // (b) mean polarization interference per seed, compared across consecutive sizes.
    let mean_x: Vec<Vec<f64>> = (0..seeds)
        .map(|s| {
            sizes
                .iter()
                .map(|&l| {
                    let params = group_params(&config, &prepared, 4, l, 0.5);
                    let obs = dual_polarized_trial(&prepared.dual, &params, s, 0, true).unwrap();
                    obs.iter().map(|o| o.interference).sum::<f64>() / obs.len() as f64
                })
                .collect()
        })
        .collect();
    let comparisons = mean_x.iter().flat_map(|row| row.windows(2).map(|w| w[1] < w[0])).collect::<Vec<_>>();
    let fraction = comparisons.iter().filter(|&&b| b).count() as f64 / comparisons.len() as f64;
    let b_pass = fraction >= 0.9;

    // (c) the interpolated residual reproduces the unit-variance target.
    let unit = LinkGains { zeta_bs_u: 1.0, zeta_bs_irs: 2.0, zeta_irs_u: 1.0, chi_bs_u: 1.0, chi_bs_irs: 1.0 };
    let dims = ChannelDims { rank, rx: 4, elements: 100 };
    let draws = 10_000u64;
    let (mut fitted, mut target, mut count) = (0.0, 0.0, 0usize);
    let (mut k_energy, mut theta_energy) = (0.0, 0.0);
    for s in 0..draws {
        let real = draw_realization(dims, unit, &Substreams::new(s, 1, 0)).unwrap();
        let p = &vectorize(&real, Polarization::Vertical)[0];
        let theta = solve_min_norm_ls(p).theta;
        fitted += (&p.k * &theta).iter().map(|z| z.norm_sqr()).sum::<f64>();
        target += p.d.iter().map(|z| z.norm_sqr()).sum::<f64>();
        count += p.d.len();
        k_energy += p.k.norm_squared() / (p.k.nrows() * p.k.ncols()) as f64;
        theta_energy += theta.norm_squared() / theta.len() as f64;
    }
    let variance = fitted / count as f64;
    let reference = target / count as f64;
    let cols = 2.0 * dims.elements as f64;
    let factorized = cols * (k_energy / draws as f64) * (theta_energy / draws as f64);
    let c_pass = (variance - 1.0).abs() < 0.05;

    report(
        6,
        "minimum-norm reflection properties",
        a_pass && b_pass && c_pass,
        format!(
            "(a) median peak {medians:.4?}; (b) X decreasing in {:.0}% of {} comparisons; (c) E|[Kθ]_i|² = {variance:.4} (E|d_i|² = {reference:.4}), product of expectations {factorized:.4}",
            100.0 * fraction,
            comparisons.len()
        ),
    );
}

#[test]
fn criterion_07_gain_distribution_ks() {
    let config = preset("fig6").unwrap();
    let prepared = config.prepare().unwrap();
    let user = 2;
    let chi = 0.5;
    let params = group_params(&config, &prepared, 4, 500, chi);
    let n = 2000u64;
    let samples: Vec<f64> = (0..n).map(|t| dual_polarized_user(&prepared.dual, &params, config.seed, t, user, true).unwrap().gain).collect();
    let dist = prepared.dual.gain_distribution(config.group, params.users[user].zeta_bs_u, 4, chi).unwrap();
    let d = ks_statistic(&samples, |x| dist.cdf(x).unwrap());
    let p = ks_pvalue(d, samples.len());
    report(7, "Kolmogorov-Smirnov on effective gain", p >= 0.01, format!("n = {n}, D = {d:.4}, p = {p:.4}"));
}

#[test]
fn criterion_08_precoder_exactness() {
    let config = preset("fig4").unwrap();
    let prepared = config.prepare().unwrap();
    let decomps = &prepared.dual.decomps;
    let mut worst_leak: f64 = 0.0;
    let mut worst_orth: f64 = 0.0;
    for k in 0..decomps.len() {
        let p = build_outer_precoder(decomps, k, config.streams).unwrap();
        let w = p.matrix.ncols();
        worst_orth = worst_orth.max((p.matrix.adjoint() * &p.matrix - CMatrix::identity(w, w)).norm());
        for (j, other) in decomps.iter().enumerate() {
            if j != k {
                worst_leak = worst_leak.max((other.colouring().adjoint() * &p.matrix).norm());
            }
        }
    }
    report(
        8,
        "inter-cluster nulling",
        worst_leak < 1e-10 && worst_orth < 1e-10,
        format!("max leakage {worst_leak:.2e}, max ‖P^H P − I‖ {worst_orth:.2e}"),
    );
}

/// Independent reference: FISTA with gradient-based restart from several starts.
fn oracle_objective(p: &VectorizedProblem, rng: &mut ChaCha8Rng) -> f64 {
    let n = p.k.ncols();
    let mut v = gaussian_matrix(rng, n, 1, 1.0).column(0).into_owned();
    let mut lip = 0.0;
    for _ in 0..300 {
        let w = p.k.ad_mul(&(&p.k * &v));
        lip = w.norm() / v.norm();
        v = w / C64::from(lip.max(1e-300));
    }
    let step = 1.0 / (1.02 * lip.max(1e-300));
    let mut best = f64::INFINITY;
    for start in 0..3 {
        let mut x = if start == 0 {
            CVector::zeros(n)
        } else {
            CVector::from_fn(n, |_, _| C64::from_polar(rng.random::<f64>(), rng.random::<f64>() * std::f64::consts::TAU))
        };
        let mut y = x.clone();
        let mut t: f64 = 1.0;
        for _ in 0..60_000 {
            let g = p.k.ad_mul(&(&p.k * &y + &p.d));
            let mut next = &y - g * C64::from(step);
            project_unit_disc(&mut next);
            let moved = (&next - &x).norm();
            let restart = (&y - &next).dotc(&(&next - &x)).re > 0.0;
            let t_next = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
            y = if restart { next.clone() } else { &next + (&next - &x) * C64::from((t - 1.0) / t_next) };
            x = next;
            t = t_next;
            if moved <= 1e-14 * (1.0 + x.norm()) {
                break;
            }
        }
        best = best.min(p.objective(&x));
    }
    best
}

/// Lagrangian dual value at the residual of `theta`: a lower bound on the optimum.
fn dual_bound(p: &VectorizedProblem, theta: &CVector) -> f64 {
    let r = p.residual(theta);
    let kr = p.k.ad_mul(&r);
    2.0 * r.dotc(&p.d).re - r.norm_squared() - 2.0 * kr.iter().map(|z| z.norm()).sum::<f64>()
}

#[test]
fn criterion_09_solver_certification() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let instances = 100;
    let mut failures = Vec::new();
    let (mut worst_kkt, mut worst_gap, mut worst_oracle): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut active = 0;
    for i in 0..instances {
        let p = if i % 2 == 0 {
            let rows = rng.random_range(1..=60);
            let cols = 2 * rng.random_range(1..=500);
            let k = gaussian_matrix(&mut rng, rows, cols, 1.0);
            let scale = rng.random_range(0.2..4.0) * (cols as f64).sqrt();
            let d = gaussian_matrix(&mut rng, rows, 1, scale * scale).column(0).into_owned();
            VectorizedProblem::new(k, d)
        } else {
            let rank = rng.random_range(1..=30);
            let rx = if rng.random_bool(0.5) { 2 } else { 4 };
            let elements = rng.random_range(1..=500);
            let chi = rng.random_range(0.05..1.0);
            let gains = LinkGains { zeta_bs_u: rng.random_range(0.5..3.0), zeta_bs_irs: 1.5, zeta_irs_u: 0.0025, chi_bs_u: chi, chi_bs_irs: chi };
            let real = draw_realization(ChannelDims { rank, rx, elements }, gains, &Substreams::new(i, 0, 0)).unwrap();
            let [pv, _] = vectorize(&real, Polarization::Horizontal);
            pv
        };
        let sol = solve_constrained_ls(&p, DEFAULT_TOL, DEFAULT_MAX_ITER);
        let mut clipped = solve_min_norm_ls(&p).theta;
        project_unit_disc(&mut clipped);
        let clipped_obj = p.objective(&clipped);
        let oracle = oracle_objective(&p, &mut rng);
        let scale = sol.objective.max(1.0);
        let kkt = kkt_residual(&p, &sol.theta);
        let gap = sol.objective - dual_bound(&p, &sol.theta);
        let oracle_gap = (sol.objective - oracle).abs() / scale;
        if !sol.min_norm {
            active += 1;
        }
        worst_kkt = worst_kkt.max(kkt);
        worst_gap = worst_gap.max(gap / scale);
        worst_oracle = worst_oracle.max(oracle_gap);
        let ok = kkt <= 1e-8 && sol.objective <= clipped_obj + 1e-12 * scale && oracle_gap <= 1e-8 && sol.max_magnitude <= 1.0 + 1e-9;
        if !ok {
            failures.push(format!("#{i} ({}×{}) kkt {kkt:.1e} oracle gap {oracle_gap:.1e}", p.k.nrows(), p.k.ncols()));
        }
    }
    report(
        9,
        "constrained least-squares certification",
        failures.is_empty(),
        format!(
            "{instances} instances ({active} with active constraints); worst KKT {worst_kkt:.1e}, worst oracle gap {worst_oracle:.1e}, worst relative duality gap {worst_gap:.1e}{}",
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join(", ")) }
        ),
    );
}

#[test]
fn criterion_10_special_function_anchors() {
    let m2 = meijer_log_gamma(2, 1.0).unwrap();
    let m1 = meijer_log_gamma(1, 1.0).unwrap();
    let oracle = tanh_sinh_semi_infinite(|x| (1.0 + x).ln() * (-x).exp(), 1e-14).unwrap();
    let e = std::f64::consts::E * exp_integral_e1(1.0).unwrap();
    let pass = (m2 - 1.0).abs() <= 1e-12 && (m1 - oracle).abs() <= 1e-10 && (e - oracle).abs() <= 1e-10;
    report(
        10,
        "special-function anchors",
        pass,
        format!("G(2,1) = {m2:.15}, G(1,1) = {m1:.15}, quadrature {oracle:.15}"),
    );
}

