//! Vectorized interference-nulling problems for the IRS reflection
//! coefficients and their solvers.
//!
//! For a user served from polarization `s`, transmissions from the
//! interfering polarization `t` must vanish at both receive polarizations.
//! Receive branch `q` gives `min ‖K θ + d‖²` subject to `|θ_l| ≤ 1` with
//! `K = [G^{tv T} ⊙ S^{qq H}, G^{th T} ⊙ S^{qq H}]`, `d = vec((D^{tq})^H)` and
//! `θ = [θ^{vq}; θ^{hq}]`.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::channel::{ChannelRealization, ReflectionConfig, block};
use crate::linalg::{khatri_rao, vec, CMatrix, CVector, C64};
use crate::precoding::Polarization;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 5000;
const POWER_ITERATIONS: usize = 30;
/// Multiplier on the power-iteration estimate of `λmax(C)`, which is a lower bound.
const LIPSCHITZ_MARGIN: f64 = 1.05;
/// Iterations between attempts to finish by solving the active-set equations.
const POLISH_EVERY: usize = 25;
const POLISH_START: f64 = 1e-2;
const POLISH_NEWTON_STEPS: usize = 40;
const POLISH_ROUNDS: usize = 8;

/// One constrained least-squares problem `min ‖K θ + d‖²`.
#[derive(Debug, Clone)]
pub struct VectorizedProblem {
    pub k: CMatrix,
    pub d: CVector,
    gram: OnceLock<CMatrix>,
}

impl VectorizedProblem {
    pub fn new(k: CMatrix, d: CVector) -> Self {
        assert_eq!(k.nrows(), d.len(), "K rows must match d");
        VectorizedProblem { k, d, gram: OnceLock::new() }
    }

    /// `C = K^H K`, formed on first use.
    pub fn gram(&self) -> &CMatrix {
        self.gram.get_or_init(|| self.k.adjoint() * &self.k)
    }

    pub fn residual(&self, theta: &CVector) -> CVector {
        &self.k * theta + &self.d
    }

    pub fn objective(&self, theta: &CVector) -> f64 {
        self.residual(theta).norm_squared()
    }

    /// Wirtinger gradient `K^H (K θ + d)`.
    pub fn gradient(&self, theta: &CVector) -> CVector {
        self.k.ad_mul(&self.residual(theta))
    }

    pub fn unknowns(&self) -> usize {
        self.k.ncols()
    }
}

/// Builds the two sub-problems (receive branches `v`, `h`) for a user served
/// from `serving`; the interfering transmit polarization is the other one.
pub fn vectorize(real: &ChannelRealization, serving: Polarization) -> [VectorizedProblem; 2] {
    use Polarization::{Horizontal as H, Vertical as V};
    let t = serving.other();
    [V, H].map(|q| {
        let s_h = real.s(q).adjoint();
        let left = khatri_rao(&real.g(t, V).transpose(), &s_h);
        let right = khatri_rao(&real.g(t, H).transpose(), &s_h);
        let mut k = CMatrix::zeros(left.nrows(), left.ncols() + right.ncols());
        k.columns_mut(0, left.ncols()).copy_from(&left);
        k.columns_mut(left.ncols(), right.ncols()).copy_from(&right);
        VectorizedProblem::new(k, vec(&real.d(t, q).adjoint()))
    })
}

/// Assembles the IRS configuration from the two sub-problem solutions
/// (`[θ^{vq}; θ^{hq}]` for `q = v, h`).
pub fn reflection_from_solutions(branch_v: &CVector, branch_h: &CVector) -> ReflectionConfig {
    use Polarization::{Horizontal as H, Vertical as V};
    let l = branch_v.len() / 2;
    let mut theta = [(); 4].map(|_| CVector::zeros(l));
    for (q, sol) in [(V, branch_v), (H, branch_h)] {
        theta[block(V, q)] = sol.rows(0, l).into_owned();
        theta[block(H, q)] = sol.rows(l, l).into_owned();
    }
    ReflectionConfig { theta }
}

#[derive(Debug, Clone)]
pub struct ReflectionSolution {
    pub theta: CVector,
    /// `‖K θ + d‖²`.
    pub objective: f64,
    /// Infinity norm of the projected-gradient map.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub max_magnitude: f64,
    pub converged: bool,
    /// Whether the feasible minimum-norm solution was returned directly.
    pub min_norm: bool,
}

/// Projects each coordinate onto the closed unit disc.
pub fn project_unit_disc(theta: &mut CVector) {
    for z in theta.iter_mut() {
        let r = z.norm();
        if r > 1.0 {
            *z /= r;
        }
    }
}

/// Infinity norm of the projected-gradient map `Lc (θ − Π(θ − ∇/Lc))`,
/// with `Lc` the power-iteration estimate of `λmax(C)`; zero exactly at the
/// constrained minimum.
pub fn kkt_residual(p: &VectorizedProblem, theta: &CVector) -> f64 {
    gradient_map_norm(p, theta, lipschitz_estimate(p))
}

fn gradient_map_norm(p: &VectorizedProblem, theta: &CVector, lip: f64) -> f64 {
    if lip <= 0.0 {
        return p.gradient(theta).camax();
    }
    let mut stepped = theta - p.gradient(theta) / C64::from(lip);
    project_unit_disc(&mut stepped);
    (theta - stepped).camax() * lip
}

fn lipschitz_estimate(p: &VectorizedProblem) -> f64 {
    // Power iteration on the smaller of K K^H and K^H K.
    let (rows, cols) = p.k.shape();
    let wide = rows <= cols;
    let n = if wide { rows } else { cols };
    let mut v = CVector::from_fn(n, |i, _| C64::new(1.0 + 0.01 * i as f64, 0.3));
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = if wide { &p.k * p.k.ad_mul(&v) } else { p.k.ad_mul(&(&p.k * &v)) };
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = v.dotc(&w).re / v.norm_squared();
        v = w / C64::from(norm);
    }
    lambda
}

/// Minimum-norm solution of `K θ + d = 0` for a wide `K`.
#[derive(Debug, Clone)]
pub struct MinNormSolution {
    pub theta: CVector,
    /// Set when `K K^H` was singular and the SVD pseudo-inverse was used instead.
    pub pseudo_inverse: bool,
}

/// `θ = −K^H (K K^H)^{-1} d`, falling back to the pseudo-inverse when `K K^H`
/// is not numerically positive definite.
pub fn solve_min_norm_ls(p: &VectorizedProblem) -> MinNormSolution {
    let kkh = &p.k * p.k.adjoint();
    let diag_max = kkh.diagonal().iter().map(|z| z.re).fold(0.0, f64::max);
    if let Some(chol) = Cholesky::new(kkh) {
        let l_diag_min = chol.l_dirty().diagonal().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        // Cholesky diagonal squared tracks the smallest pivot.
        if l_diag_min * l_diag_min > 1e-20 * diag_max {
            let y = chol.solve(&p.d);
            return MinNormSolution { theta: -p.k.ad_mul(&y), pseudo_inverse: false };
        }
    }
    let pinv: DMatrix<C64> = p.k.clone().pseudo_inverse(1e-12 * p.k.norm().max(f64::MIN_POSITIVE)).expect("non-negative epsilon");
    MinNormSolution { theta: -(pinv * &p.d), pseudo_inverse: true }
}

/// Globally minimizes `‖K θ + d‖²` over `|θ_l| ≤ 1` for every coordinate.
///
/// Returns the minimum-norm solution when it is already feasible; otherwise
/// runs accelerated projected gradient with objective-based momentum
/// restarts, so the accepted iterates never increase the objective.
pub fn solve_constrained_ls(p: &VectorizedProblem, tol: f64, max_iter: usize) -> ReflectionSolution {
    let n = p.unknowns();
    if p.d.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return finish(p, CVector::zeros(n), 0, true, false);
    }

    let mn = solve_min_norm_ls(p);
    let mn_peak = mn.theta.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if mn_peak <= 1.0 && !mn.pseudo_inverse {
        let sol = finish(p, mn.theta.clone(), 0, true, true);
        if sol.kkt_residual <= tol {
            return sol;
        }
    }

    // Warm start from the clipped minimum-norm point.
    let mut x = mn.theta;
    project_unit_disc(&mut x);
    let lip0 = lipschitz_estimate(p);
    if lip0 <= 0.0 {
        return finish(p, x, 0, true, false);
    }
    let mut lip = LIPSCHITZ_MARGIN * lip0;
    let mut rx = p.residual(&x);
    let mut y = x.clone();
    let mut t = 1.0_f64;

    for iter in 1..=max_iter {
        let gy = p.gradient(&y);
        let mut x_new = &y - gy / C64::from(lip);
        project_unit_disc(&mut x_new);
        let (mut _k_step, mut change) = objective_change(p, &rx, &x_new, &x);

        if change > 0.0 {
            // Momentum overshoot: restart from x with a plain projected step.
            let gx = p.k.ad_mul(&rx);
            for _ in 0..64 {
                x_new = &x - &gx / C64::from(lip);
                project_unit_disc(&mut x_new);
                (_k_step, change) = objective_change(p, &rx, &x_new, &x);
                if change <= 0.0 {
                    break;
                }
                lip *= 2.0;
            }
            if change > 0.0 {
                break;
            }
            t = 1.0;
            y = x_new.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &x_new + (&x_new - &x) * C64::from((t - 1.0) / t_next);
            t = t_next;
        }
        x = x_new;
        rx = p.residual(&x);

        let kkt = gradient_map_norm(p, &x, lip0);
        if kkt <= tol {
            return finish(p, x, iter, true, false);
        }
        if iter % POLISH_EVERY == 0 && kkt < POLISH_START {
            if let Some(theta) = polish(p, &x) {
                if gradient_map_norm(p, &theta, lip0) <= tol {
                    return finish(p, theta, iter, true, false);
                }
            }
        }
    }
    finish(p, x, max_iter, false, false)
}

/// Solves the optimality conditions exactly for an active set guessed from
/// `x`: coordinates on the unit circle keep unit modulus and only their phases
/// move, the rest are unconstrained. The free coordinates are eliminated through
/// the range of `K_F`, leaving a phase problem solved by Newton's method.
/// Coordinates with negative multipliers are released and free coordinates
/// leaving the disc are pinned to it, for a few rounds.
fn polish(p: &VectorizedProblem, x: &CVector) -> Option<CVector> {
    let mut start = x.clone();
    let mut active: Vec<bool> = x.iter().map(|z| z.norm() > 1.0 - 1e-9).collect();
    for _ in 0..POLISH_ROUNDS {
        match polish_active_set(p, &start, &active) {
            Polished::Solution(theta) => return Some(theta),
            Polished::Release(idx) => idx.into_iter().for_each(|l| active[l] = false),
            Polished::Pin(theta, idx) => {
                start = theta;
                for l in idx {
                    active[l] = true;
                    let r = start[l].norm();
                    start[l] /= r;
                }
            }
        }
    }
    None
}

enum Polished {
    Solution(CVector),
    Release(Vec<usize>),
    Pin(CVector, Vec<usize>),
}

fn polish_active_set(p: &VectorizedProblem, x: &CVector, is_active: &[bool]) -> Polished {
    let m = p.k.nrows();
    let (active, free): (Vec<usize>, Vec<usize>) = (0..x.len()).partition(|&l| is_active[l]);
    let select = |idx: &[usize]| CMatrix::from_fn(m, idx.len(), |i, j| p.k[(i, idx[j])]);
    let k_free = select(&free);
    let k_active = select(&active);

    // Split C^m into range(K_F) and its orthogonal complement Q.
    let (range, range_inv, q) = if free.is_empty() {
        (CMatrix::zeros(m, 0), Vec::new(), CMatrix::identity(m, m))
    } else {
        let gram = &k_free * k_free.adjoint();
        let eig = ((&gram + gram.adjoint()).scale(0.5)).symmetric_eigen();
        let top = eig.eigenvalues.max().max(0.0);
        let (mut r_cols, mut r_inv, mut q_cols) = (Vec::new(), Vec::new(), Vec::new());
        for (i, &w) in eig.eigenvalues.iter().enumerate() {
            if w > 1e-12 * top && w > 0.0 {
                r_cols.push(eig.eigenvectors.column(i));
                r_inv.push(1.0 / w);
            } else {
                q_cols.push(eig.eigenvectors.column(i));
            }
        }
        let basis = |cols: &[_]| if cols.is_empty() { CMatrix::zeros(m, 0) } else { CMatrix::from_columns(cols) };
        (basis(&r_cols), r_inv, basis(&q_cols))
    };

    let mut z = CVector::from_iterator(active.len(), active.iter().map(|&l| x[l] / x[l].norm()));
    if !active.is_empty() && q.ncols() > 0 {
        let w = q.ad_mul(&k_active);
        let e = q.ad_mul(&p.d);
        let phase_objective = |z: &CVector| (&w * z + &e).norm_squared();
        let mut h = phase_objective(&z);
        for _ in 0..POLISH_NEWTON_STEPS {
            let s = w.ad_mul(&(&w * &z + &e));
            // h(φ) = ‖W e^{jφ} + e‖²; gradient and Hessian in the phases.
            let grad = DVector::from_iterator(z.len(), z.iter().zip(s.iter()).map(|(zl, sl)| -2.0 * (zl * sl.conj()).im));
            let diag = DVector::from_iterator(z.len(), z.iter().zip(s.iter()).map(|(zl, sl)| -2.0 * (zl * sl.conj()).re));
            let scale = diag.amax().max(f64::MIN_POSITIVE);
            // Clamping keeps the modified Hessian positive definite.
            let diag = diag.map(|v| v.max(1e-8 * scale));
            let mut zw = w.clone();
            for (mut col, zl) in zw.column_iter_mut().zip(z.iter()) {
                col *= *zl;
            }
            let y = DMatrix::from_fn(2 * zw.nrows(), zw.ncols(), |i, j| {
                let v = zw[(i % zw.nrows(), j)];
                if i < zw.nrows() { v.re } else { v.im }
            });
            let Some(step) = woodbury_solve(&diag, &y, &(-&grad)) else {
                break;
            };
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial = CVector::from_iterator(z.len(), z.iter().zip(step.iter()).map(|(zl, d)| zl * C64::from_polar(1.0, alpha * d)));
                let h_trial = phase_objective(&trial);
                if h_trial <= h * (1.0 + 1e-13) {
                    z = trial;
                    h = h_trial;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted || alpha * step.amax() < 1e-15 {
                break;
            }
        }
        let s = w.ad_mul(&(&w * &z + &e));
        let mu: Vec<f64> = z.iter().zip(s.iter()).map(|(zl, sl)| -(zl * sl.conj()).re).collect();
        let scale = mu.iter().fold(0.0_f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
        let negative: Vec<usize> = (0..z.len()).filter(|&i| mu[i] < -1e-9 * scale).map(|i| active[i]).collect();
        if !negative.is_empty() {
            return Polished::Release(negative);
        }
    }

    // Free coordinates: nearest point to x_F reproducing the projected residual.
    let mut theta = x.clone();
    for (i, &l) in active.iter().enumerate() {
        theta[l] = z[i];
    }
    if !free.is_empty() {
        let x_free = CVector::from_iterator(free.len(), free.iter().map(|&l| x[l]));
        let target = &k_free * &x_free + &k_active * &z + &p.d;
        let mut coeff = range.ad_mul(&target);
        for (c, inv) in coeff.iter_mut().zip(&range_inv) {
            *c *= *inv;
        }
        let correction = k_free.ad_mul(&(&range * coeff));
        for (i, &l) in free.iter().enumerate() {
            theta[l] = x_free[i] - correction[i];
        }
        let outside: Vec<usize> = free.iter().copied().filter(|&l| theta[l].norm() > 1.0).collect();
        if !outside.is_empty() {
            return Polished::Pin(theta, outside);
        }
    }
    Polished::Solution(theta)
}

/// Solves `(D + 2 YᵀY) s = b` for diagonal `D > 0` through the Woodbury identity.
fn woodbury_solve(diag: &DVector<f64>, y: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let d_inv_b = b.component_div(diag);
    if y.nrows() == 0 {
        return Some(d_inv_b);
    }
    let y_d_inv = DMatrix::from_fn(y.nrows(), y.ncols(), |i, j| y[(i, j)] / diag[j]);
    let inner = DMatrix::<f64>::identity(y.nrows(), y.nrows()).scale(0.5) + &y_d_inv * y.transpose();
    let rhs = y * &d_inv_b;
    let sol = inner.lu().solve(&rhs)?;
    Some(d_inv_b - y_d_inv.transpose() * sol)
}

/// `K (x_new − x)` and the exact objective change `2 Re⟨r, KΔ⟩ + ‖KΔ‖²`,
/// free of the cancellation in `f(x_new) − f(x)`.
fn objective_change(p: &VectorizedProblem, rx: &CVector, x_new: &CVector, x: &CVector) -> (CVector, f64) {
    let k_step = &p.k * (x_new - x);
    let cross = rx.dotc(&k_step).re;
    let change = 2.0 * cross + k_step.norm_squared();
    // Changes within the rounding of the step itself (projected coordinates
    // carry relative error ~ε) count as no change.
    let scale = k_step.norm() + p.k.norm() * x.camax().max(1.0);
    let noise = 64.0 * f64::EPSILON * rx.norm() * scale;
    (k_step, if change.abs() <= noise { 0.0 } else { change })
}

fn finish(p: &VectorizedProblem, theta: CVector, iterations: usize, converged: bool, min_norm: bool) -> ReflectionSolution {
    let kkt = kkt_residual(p, &theta);
    ReflectionSolution {
        objective: p.objective(&theta),
        kkt_residual: kkt,
        max_magnitude: theta.iter().map(|z| z.norm()).fold(0.0, f64::max),
        iterations,
        converged: converged && kkt.is_finite(),
        min_norm,
        theta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{compose_reduced, draw_realization, ChannelDims, LinkGains, Substreams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, rows: usize, cols: usize, d_scale: f64) -> VectorizedProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = crate::channel::gaussian_matrix(&mut rng, rows, cols, 1.0);
        let d = crate::channel::gaussian_matrix(&mut rng, rows, 1, d_scale * d_scale).column(0).into_owned();
        VectorizedProblem::new(k, d)
    }

    /// Plain projected gradient with a fixed conservative step, run for a long horizon.
    fn projected_gradient_oracle(p: &VectorizedProblem, start: CVector) -> f64 {
        let step = 1.0 / p.k.norm_squared();
        let mut x = start;
        project_unit_disc(&mut x);
        for _ in 0..200_000 {
            let g = p.k.ad_mul(&(&p.k * &x + &p.d));
            x -= g * C64::from(step);
            project_unit_disc(&mut x);
        }
        (&p.k * &x + &p.d).norm_squared()
    }

    #[test]
    fn zero_target_gives_zero_solution() {
        let mut p = random_problem(1, 4, 6, 1.0);
        p.d.fill(C64::new(0.0, 0.0));
        let sol = solve_constrained_ls(&p, DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert_eq!(sol.objective, 0.0);
        assert!(sol.theta.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn scalar_problem_clips_to_unit_circle() {
        let p = VectorizedProblem::new(
            CMatrix::from_element(1, 1, C64::new(2.0, 0.0)),
            CVector::from_element(1, C64::new(-4.0, 0.0)),
        );
        let sol = solve_constrained_ls(&p, DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert!((sol.theta[0] - C64::new(1.0, 0.0)).norm() < 1e-9);
        assert!((sol.objective - 4.0).abs() < 1e-9);
        assert!(sol.converged);
    }

    #[test]
    fn constrained_solution_matches_multistart_oracle() {
        let p = random_problem(7, 6, 10, 4.0);
        let sol = solve_constrained_ls(&p, DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert!(sol.converged, "kkt {}", sol.kkt_residual);
        assert!(!sol.min_norm);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let best = (0..10)
            .map(|_| projected_gradient_oracle(&p, crate::channel::gaussian_matrix(&mut rng, 10, 1, 1.0).column(0).into_owned()))
            .fold(f64::INFINITY, f64::min);
        assert!((sol.objective - best).abs() <= 1e-8 * best.max(1.0), "{} vs {best}", sol.objective);
        assert!(sol.max_magnitude <= 1.0 + 1e-9);
    }

    #[test]
    fn min_norm_interpolates() {
        let p = random_problem(3, 6, 20, 1.0);
        let mn = solve_min_norm_ls(&p);
        assert!(!mn.pseudo_inverse);
        assert!(p.residual(&mn.theta).norm() < 1e-10);
    }

    #[test]
    fn min_norm_with_orthonormal_rows_is_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = crate::channel::gaussian_matrix(&mut rng, 8, 3, 1.0);
        let q = a.qr().q().adjoint();
        let d = crate::channel::gaussian_matrix(&mut rng, 3, 1, 1.0).column(0).into_owned();
        let p = VectorizedProblem::new(q.clone(), d.clone());
        let mn = solve_min_norm_ls(&p);
        assert!((&mn.theta + q.ad_mul(&d)).norm() < 1e-12);
        assert!((mn.theta.norm() - d.norm()).abs() < 1e-12);
    }

    #[test]
    fn min_norm_matches_svd_pseudo_inverse() {
        let p = random_problem(11, 5, 12, 1.0);
        let mn = solve_min_norm_ls(&p);
        // Pseudo-inverse from the thin SVD, K = U Σ V^H, K⁺ = V Σ⁻¹ U^H.
        let svd = p.k.clone().svd(true, true);
        let u = svd.u.unwrap();
        let v_t = svd.v_t.unwrap();
        let mut sigma_inv = CMatrix::zeros(svd.singular_values.len(), svd.singular_values.len());
        for (i, s) in svd.singular_values.iter().enumerate() {
            sigma_inv[(i, i)] = C64::from(1.0 / s);
        }
        let oracle = -(v_t.adjoint() * sigma_inv * u.adjoint() * &p.d);
        assert!((&mn.theta - oracle).norm() < 1e-10);
    }

    #[test]
    fn rank_deficient_system_falls_back_to_pseudo_inverse() {
        let row = CMatrix::from_fn(1, 4, |_, j| C64::new(j as f64 + 1.0, 0.5));
        let k = CMatrix::from_fn(2, 4, |_, j| row[(0, j)]);
        let p = VectorizedProblem::new(k, CVector::from_element(2, C64::new(1.0, 0.0)));
        assert!(solve_min_norm_ls(&p).pseudo_inverse);
    }

    #[test]
    fn vectorized_residual_equals_cross_polar_block() {
        use Polarization::{Horizontal as H, Vertical as V};
        let dims = ChannelDims { rank: 3, rx: 4, elements: 5 };
        let gains = LinkGains { zeta_bs_u: 1.3, zeta_bs_irs: 0.7, zeta_irs_u: 0.9, chi_bs_u: 0.4, chi_bs_irs: 0.6 };
        let real = draw_realization(dims, gains, &Substreams::new(4, 0, 0)).unwrap();
        let [pv, ph] = vectorize(&real, V);
        assert_eq!(pv.k.shape(), (6, 10));
        assert_eq!(pv.d.len(), 6);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut tv = crate::channel::gaussian_matrix(&mut rng, 10, 1, 1.0).column(0).into_owned();
        let mut th = crate::channel::gaussian_matrix(&mut rng, 10, 1, 1.0).column(0).into_owned();
        project_unit_disc(&mut tv);
        project_unit_disc(&mut th);
        let refl = reflection_from_solutions(&tv, &th);
        let b = compose_reduced(&real, &refl).unwrap();
        // The residual is vec of the Hermitian of the interfering-polarization block.
        assert!((pv.residual(&tv) - vec(&b[block(H, V)].adjoint())).norm() < 1e-12);
        assert!((ph.residual(&th) - vec(&b[block(H, H)].adjoint())).norm() < 1e-12);
    }

    #[test]
    fn zero_channels_vectorize_to_zero() {
        let dims = ChannelDims { rank: 2, rx: 2, elements: 3 };
        let gains = LinkGains { zeta_bs_u: 1.0, zeta_bs_irs: 1.0, zeta_irs_u: 1.0, chi_bs_u: 1.0, chi_bs_irs: 1.0 };
        let mut real = draw_realization(dims, gains, &Substreams::new(0, 0, 0)).unwrap();
        for m in real.direct.iter_mut().chain(real.bs_irs.iter_mut()).chain(real.irs_user.iter_mut()) {
            m.fill(C64::new(0.0, 0.0));
        }
        for p in vectorize(&real, Polarization::Horizontal) {
            assert_eq!(p.k.norm(), 0.0);
            assert_eq!(p.d.norm(), 0.0);
        }
    }

    #[test]
    fn feasible_min_norm_short_circuits() {
        let p = random_problem(21, 4, 200, 0.1);
        let sol = solve_constrained_ls(&p, DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert!(sol.min_norm);
        assert!(sol.objective < 1e-20);
    }

    #[test]
    fn objective_never_exceeds_clipped_min_norm() {
        for seed in 0..10 {
            let p = random_problem(seed, 8, 12, 3.0);
            let sol = solve_constrained_ls(&p, DEFAULT_TOL, DEFAULT_MAX_ITER);
            let mut clipped = solve_min_norm_ls(&p).theta;
            project_unit_disc(&mut clipped);
            assert!(sol.objective <= p.objective(&clipped) + 1e-12);
            assert!(sol.converged, "seed {seed} kkt {}", sol.kkt_residual);
        }
    }
}
