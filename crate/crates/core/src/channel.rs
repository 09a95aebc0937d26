//! Fast-fading draws for the BS-U, BS-IRS and IRS-U links and composition of
//! the effective dual-polarized channel including IRS reflection.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceDecomposition;
use crate::error::{Error, Result};
use crate::linalg::{scale_rows, CMatrix, CVector, C64};
use crate::precoding::Polarization;

/// Slack allowed on `|θ| ≤ 1`.
pub const PASSIVITY_SLACK: f64 = 1e-9;

/// `ϱ d^{-η}`.
pub fn path_loss(array_gain: f64, distance: f64, exponent: f64) -> Result<f64> {
    if !(distance > 0.0) || !(exponent >= 0.0) {
        return Err(Error::InvalidArgument(format!("path loss needs d > 0 and η ≥ 0, got d = {distance}, η = {exponent}")));
    }
    Ok(array_gain * distance.powf(-exponent))
}

/// Large-scale gains and inverse cross-polar discrimination per link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGains {
    pub zeta_bs_u: f64,
    pub zeta_bs_irs: f64,
    pub zeta_irs_u: f64,
    pub chi_bs_u: f64,
    pub chi_bs_irs: f64,
}

impl LinkGains {
    pub fn validate(&self) -> Result<()> {
        for (name, z) in [("ζ BS-U", self.zeta_bs_u), ("ζ BS-IRS", self.zeta_bs_irs), ("ζ IRS-U", self.zeta_irs_u)] {
            if !(z.is_finite() && z > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} = {z} must be > 0")));
            }
        }
        for (name, c) in [("χ BS-U", self.chi_bs_u), ("χ BS-IRS", self.chi_bs_irs)] {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidArgument(format!("{name} = {c} not in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Dimensions of one user's reduced channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelDims {
    /// Effective covariance rank `r*`.
    pub rank: usize,
    /// Receive antennas `N` (both polarizations).
    pub rx: usize,
    /// Dual-polarized IRS elements `L`.
    pub elements: usize,
}

impl ChannelDims {
    pub fn rx_half(&self) -> usize {
        self.rx / 2
    }
}

/// Index of block `(p, q)`: transmit (or impinging) polarization `p`, arrival polarization `q`.
#[inline]
pub fn block(p: Polarization, q: Polarization) -> usize {
    2 * p.index() + q.index()
}

/// Independent links of a trial; each draws from its own substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Link {
    BsUser = 0,
    BsIrs = 1,
    IrsUser = 2,
    Symbols = 3,
    SinglePolarized = 4,
}

/// Counter-based stream derivation: every `(trial, user, link)` gets its own
/// ChaCha stream under one master seed, so trial order never affects results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substreams {
    pub seed: u64,
    pub trial: u64,
    pub user: u64,
}

impl Substreams {
    pub fn new(seed: u64, trial: u64, user: u64) -> Self {
        Substreams { seed, trial, user }
    }

    pub fn rng(&self, link: Link) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((self.trial << 16) | (self.user << 4) | link as u64);
        rng
    }
}

/// Circularly-symmetric complex Gaussian with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CMatrix {
    // Column-major fill order keeps draws reproducible independent of nalgebra internals.
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(complex_gaussian(rng, var));
    }
    CMatrix::from_vec(rows, cols, data)
}

/// Fast-fading blocks of one user with every large-scale factor folded in.
///
/// `direct[block(p, q)]` is `D^{pq}` (`r* × N/2`), `bs_irs[block(p, q)]` is
/// `G^{pq}` (`L × r*`), `irs_user[q]` is `S^{qq}` (`L × N/2`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub direct: [CMatrix; 4],
    pub bs_irs: [CMatrix; 4],
    pub irs_user: [CMatrix; 2],
    pub gains: LinkGains,
}

impl ChannelRealization {
    pub fn dims(&self) -> ChannelDims {
        ChannelDims {
            rank: self.direct[0].nrows(),
            rx: 2 * self.direct[0].ncols(),
            elements: self.bs_irs[0].nrows(),
        }
    }

    pub fn d(&self, p: Polarization, q: Polarization) -> &CMatrix {
        &self.direct[block(p, q)]
    }

    pub fn g(&self, p: Polarization, q: Polarization) -> &CMatrix {
        &self.bs_irs[block(p, q)]
    }

    pub fn s(&self, q: Polarization) -> &CMatrix {
        &self.irs_user[q.index()]
    }
}

/// Draws one user's realization. Co-polar BS-side blocks have variance `ζ`
/// (BS-U) or `ζ/2` (BS-IRS, carrying the passive-split normalization),
/// cross-polar blocks are additionally scaled by `χ`, IRS-U blocks by `ζ_IRS-U`.
pub fn draw_realization(dims: ChannelDims, gains: LinkGains, streams: &Substreams) -> Result<ChannelRealization> {
    if dims.rank == 0 || dims.rx < 2 || dims.rx % 2 != 0 || dims.elements == 0 {
        return Err(Error::Dimension(format!("invalid channel dimensions {dims:?}")));
    }
    gains.validate()?;
    let half = dims.rx_half();
    let pairs = [
        (Polarization::Vertical, Polarization::Vertical),
        (Polarization::Vertical, Polarization::Horizontal),
        (Polarization::Horizontal, Polarization::Vertical),
        (Polarization::Horizontal, Polarization::Horizontal),
    ];

    let mut rng = streams.rng(Link::BsUser);
    let direct = pairs.map(|(p, q)| {
        let var = gains.zeta_bs_u * if p == q { 1.0 } else { gains.chi_bs_u };
        scaled_gaussian(&mut rng, dims.rank, half, var)
    });
    let mut rng = streams.rng(Link::BsIrs);
    let bs_irs = pairs.map(|(p, q)| {
        let var = 0.5 * gains.zeta_bs_irs * if p == q { 1.0 } else { gains.chi_bs_irs };
        scaled_gaussian(&mut rng, dims.elements, dims.rank, var)
    });
    let mut rng = streams.rng(Link::IrsUser);
    let irs_user = [(); 2].map(|_| gaussian_matrix(&mut rng, dims.elements, half, gains.zeta_irs_u));

    Ok(ChannelRealization { direct, bs_irs, irs_user, gains })
}

/// Draws unit-variance entries then scales, so a zero variance yields exact zeros
/// while consuming the same random numbers.
fn scaled_gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, var: f64) -> CMatrix {
    gaussian_matrix(rng, rows, cols, 1.0).scale(var.sqrt())
}

/// Reflection coefficients of one dual-polarized IRS; `theta[block(p, q)]`
/// holds the diagonal of `Φ^{pq}` (impinging `p`, reflected `q`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionConfig {
    pub theta: [CVector; 4],
}

impl ReflectionConfig {
    pub fn zeros(elements: usize) -> Self {
        ReflectionConfig { theta: [(); 4].map(|_| CVector::zeros(elements)) }
    }

    pub fn phi(&self, p: Polarization, q: Polarization) -> &CVector {
        &self.theta[block(p, q)]
    }

    pub fn elements(&self) -> usize {
        self.theta[0].len()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.theta.iter().flat_map(|t| t.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, a: C64) -> Self {
        ReflectionConfig { theta: self.theta.clone().map(|t| t * a) }
    }
}

/// Reduced effective blocks `B^{pq}` (`r* × N/2`) with `H̃^{pq} = U Λ^{1/2} B^{pq}`:
/// `B^{pq} = (Φ^{vq} G^{pv} + Φ^{hq} G^{ph})^H S^{qq} + D^{pq}`.
pub fn compose_reduced(real: &ChannelRealization, refl: &ReflectionConfig) -> Result<[CMatrix; 4]> {
    let dims = real.dims();
    if refl.elements() != dims.elements {
        return Err(Error::Dimension(format!(
            "reflection has {} elements, channel has {}",
            refl.elements(),
            dims.elements
        )));
    }
    let peak = refl.max_magnitude();
    if peak > 1.0 + PASSIVITY_SLACK {
        return Err(Error::Passivity(peak));
    }
    use Polarization::{Horizontal as H, Vertical as V};
    let mut out = real.direct.clone();
    for p in Polarization::BOTH {
        for q in Polarization::BOTH {
            let reflected = scale_rows(refl.phi(V, q), real.g(p, V)) + scale_rows(refl.phi(H, q), real.g(p, H));
            out[block(p, q)] += reflected.adjoint() * real.s(q);
        }
    }
    Ok(out)
}

/// Effective blocks `H̃^{pq}` of size `(M/2) × (N/2)`.
pub fn compose_channel(real: &ChannelRealization, refl: &ReflectionConfig, decomp: &CovarianceDecomposition) -> Result<[CMatrix; 4]> {
    if decomp.rank() != real.dims().rank {
        return Err(Error::Dimension(format!(
            "covariance rank {} does not match channel rank {}",
            decomp.rank(),
            real.dims().rank
        )));
    }
    let colouring = decomp.colouring();
    Ok(compose_reduced(real, refl)?.map(|b| &colouring * b))
}
