//! One Monte Carlo trial of a NOMA group: channel draws, IRS configuration,
//! detection, and the baseline systems that share the same cluster geometry.

use crate::analytics::GainDistribution;
use crate::channel::{compose_reduced, draw_realization, gaussian_matrix, ChannelDims, Link, LinkGains, ReflectionConfig, Substreams};
use crate::covariance::{eigendecompose, one_ring_covariance, ArrayGeometry, ClusterGeometry, CovarianceDecomposition};
use crate::error::{Error, Result};
use crate::irs::{reflection_from_solutions, solve_constrained_ls, vectorize, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::linalg::{CMatrix, CVector};
use crate::precoding::{build_outer_precoder, OuterPrecoder, Polarization, PowerAllocation, SubsetAssignment};
use crate::receiver::{build_detector, gains_and_interference, sinr, virtual_blocks, DEGENERATE_TOL};

/// Covariances of every cluster, the outer precoder of the simulated one and
/// the shared projection `A = Λ^{1/2} U^H P̃`.
#[derive(Debug, Clone)]
pub struct ClusterSetup {
    pub decomps: Vec<CovarianceDecomposition>,
    pub target: usize,
    pub precoder: OuterPrecoder,
    pub projection: CMatrix,
}

impl ClusterSetup {
    /// `streams` is the dual-polarized `M̄`; the precoder has `M̄/2` columns.
    pub fn new(array: &ArrayGeometry, clusters: &[ClusterGeometry], target: usize, streams: usize, energy_fraction: f64) -> Result<Self> {
        let decomps = clusters
            .iter()
            .map(|c| eigendecompose(&one_ring_covariance(array, c)?, energy_fraction))
            .collect::<Result<Vec<_>>>()?;
        let precoder = build_outer_precoder(&decomps, target, streams)?;
        let projection = decomps[target].colouring().adjoint() * &precoder.matrix;
        Ok(ClusterSetup { decomps, target, precoder, projection })
    }

    pub fn rank(&self) -> usize {
        self.decomps[self.target].rank()
    }

    /// `[P̃^H R P̃]_{gg}` with the covariance restricted to its retained modes.
    pub fn diagonal(&self, group: usize) -> f64 {
        self.projection.column(group).norm_squared()
    }

    /// Large-`L` distribution of `ḧ` for a user with BS-U gain `zeta`.
    pub fn gain_distribution(&self, group: usize, zeta: f64, rx: usize, chi: f64) -> Result<GainDistribution> {
        GainDistribution::from_dimensions(rx, self.precoder.streams, 1.0 / (zeta * self.diagonal(group)), chi)
    }
}

/// IRS solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

/// Everything a trial of one group needs besides the cluster setup.
#[derive(Debug, Clone)]
pub struct GroupParams {
    /// Receive antennas `N`.
    pub rx: usize,
    /// Dual-polarized IRS elements `L`.
    pub elements: usize,
    /// Zero-based group index `g`.
    pub group: usize,
    /// Per-user link gains, weakest user first.
    pub users: Vec<LinkGains>,
    pub assignment: SubsetAssignment,
    pub alloc: PowerAllocation,
    pub solver: SolverSettings,
}

impl GroupParams {
    fn serving(&self, user: usize) -> Result<Polarization> {
        self.assignment
            .polarization_of(user)
            .ok_or_else(|| Error::InvalidArgument(format!("user {user} belongs to no subset")))
    }
}

/// What one user observes in one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserObservation {
    /// `ḧ`.
    pub gain: f64,
    /// `h_v`, `h_h`.
    pub per_polarization: [f64; 2],
    /// Residual polarization interference `X`.
    pub interference: f64,
    pub degenerate: bool,
    /// Whether both IRS sub-problems met the solver tolerance.
    pub solver_converged: bool,
    /// Largest reflection magnitude used.
    pub max_reflection: f64,
}

/// Variance of each entry of the interfering symbol vector `x^t`: the power of
/// the subset served from `t` in every group.
fn interfering_symbols(params: &GroupParams, streams: &Substreams, t: Polarization, width: usize) -> CVector {
    let power: f64 = params.assignment.subset(t).iter().map(|&u| params.alloc.get(u)).sum();
    let mut rng = streams.rng(Link::Symbols);
    gaussian_matrix(&mut rng, width, 1, power).column(0).into_owned()
}

/// One trial of the dual-polarized system. With `use_irs` the reflection
/// coefficients are optimized per user, otherwise the IRSs are absent.
pub fn dual_polarized_trial(setup: &ClusterSetup, params: &GroupParams, seed: u64, trial: u64, use_irs: bool) -> Result<Vec<UserObservation>> {
    (0..params.users.len())
        .map(|user| dual_polarized_user(setup, params, seed, trial, user, use_irs))
        .collect()
}

/// The observation of a single user; identical to its entry in [`dual_polarized_trial`].
pub fn dual_polarized_user(setup: &ClusterSetup, params: &GroupParams, seed: u64, trial: u64, user: usize, use_irs: bool) -> Result<UserObservation> {
    let gains = params
        .users
        .get(user)
        .ok_or_else(|| Error::InvalidArgument(format!("user {user} out of range")))?;
    let dims = ChannelDims { rank: setup.rank(), rx: params.rx, elements: params.elements };
    let serving = params.serving(user)?;
    let streams = Substreams::new(seed, trial, user as u64);
    let real = draw_realization(dims, *gains, &streams)?;
    let (refl, converged) = if use_irs {
        let [pv, ph] = vectorize(&real, serving);
        let sv = solve_constrained_ls(&pv, params.solver.tol, params.solver.max_iter);
        let sh = solve_constrained_ls(&ph, params.solver.tol, params.solver.max_iter);
        (reflection_from_solutions(&sv.theta, &sh.theta), sv.converged && sh.converged)
    } else {
        (ReflectionConfig::zeros(params.elements), true)
    };
    let reduced = compose_reduced(&real, &refl)?;
    let det = build_detector(virtual_blocks(&reduced, &setup.projection), serving);
    let x = interfering_symbols(params, &streams, serving.other(), setup.precoder.width());
    let report = gains_and_interference(&det, &x, params.group)?;
    Ok(UserObservation {
        gain: report.gain,
        per_polarization: report.per_polarization,
        interference: report.interference,
        degenerate: report.degenerate,
        solver_converged: converged,
        max_reflection: refl.max_magnitude(),
    })
}

/// One trial of the single-polarized reference system: `M` co-polarized
/// antennas, `N` receive antennas, no IRS and no polarization interference.
/// `setup` must be built over an array of `M` single elements with twice the
/// single-polarized stream count, so its precoder has `M̄` columns.
pub fn single_polarized_trial(setup: &ClusterSetup, rx: usize, group: usize, users: &[LinkGains], seed: u64, trial: u64) -> Result<Vec<UserObservation>> {
    let width = setup.precoder.width();
    if group >= width {
        return Err(Error::InvalidArgument(format!("group {group} out of range ({width} streams)")));
    }
    let mut out = Vec::with_capacity(users.len());
    for (user, gains) in users.iter().enumerate() {
        let mut rng = Substreams::new(seed, trial, user as u64).rng(Link::SinglePolarized);
        let w = gaussian_matrix(&mut rng, setup.rank(), rx, gains.zeta_bs_u);
        let virt = w.ad_mul(&setup.projection);
        let svd = virt.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let degenerate = smax == 0.0 || svd.singular_values.min() < DEGENERATE_TOL * smax;
        let gain = if degenerate {
            0.0
        } else {
            let pinv = svd.pseudo_inverse(DEGENERATE_TOL * smax).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            1.0 / pinv.row(group).norm_squared()
        };
        out.push(UserObservation {
            gain,
            per_polarization: [gain, 0.0],
            interference: 0.0,
            degenerate,
            solver_converged: true,
            max_reflection: 0.0,
        });
    }
    Ok(out)
}

/// `log₂(1 + γ)` of `user` decoding its own message after SIC within `ladder`.
pub fn noma_rate(obs: &UserObservation, alloc: &PowerAllocation, ladder: &[usize], user: usize, xi: f64, snr: f64, include_interference: bool) -> Result<f64> {
    let j = crate::receiver::sic_interference(alloc, ladder, user, xi)?;
    let x = if include_interference { obs.interference } else { 0.0 };
    Ok(sinr(obs.gain, x, alloc.get(user), j, snr).ln_1p() / std::f64::consts::LN_2)
}

/// TDMA share of a single-antenna-stream point-to-point link.
pub fn oma_rate(obs: &UserObservation, users: usize, snr: f64) -> f64 {
    (snr * obs.gain).ln_1p() / std::f64::consts::LN_2 / users as f64
}
