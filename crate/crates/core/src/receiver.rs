//! Virtual channels, block detectors, per-polarization gains and the
//! imperfect-SIC ladder.

use crate::channel::block;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::precoding::{Polarization, PowerAllocation};

/// Singular-value ratio below which a virtual block counts as rank deficient.
pub const DEGENERATE_TOL: f64 = 1e-10;

/// Virtual blocks `H_^{pq} = (B^{pq})^H A`, with `A = Λ^{1/2} U^H P̃`
/// (`r* × M̄/2`) shared by every user of the cluster.
pub fn virtual_blocks(reduced: &[CMatrix; 4], projection: &CMatrix) -> [CMatrix; 4] {
    reduced.each_ref().map(|b| b.ad_mul(projection))
}

/// Virtual blocks and the detector of one user.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    /// `blocks[block(p, q)]`: transmit `p` to receive `q`, `(N/2) × (M̄/2)`.
    pub blocks: [CMatrix; 4],
    /// Pseudo-inverse of the serving block seen at each receive polarization.
    pub detectors: [CMatrix; 2],
    pub serving: Polarization,
    /// Set when a serving block is numerically rank deficient.
    pub degenerate: bool,
}

impl EffectiveChannel {
    pub fn block(&self, p: Polarization, q: Polarization) -> &CMatrix {
        &self.blocks[block(p, q)]
    }

    pub fn detector(&self, q: Polarization) -> &CMatrix {
        &self.detectors[q.index()]
    }
}

/// Builds the detector of a user served from `serving`: at receive
/// polarization `q` it is the Moore–Penrose inverse of `H_^{serving, q}`.
pub fn build_detector(blocks: [CMatrix; 4], serving: Polarization) -> EffectiveChannel {
    let mut degenerate = false;
    let detectors = Polarization::BOTH.map(|q| {
        let h = &blocks[block(serving, q)];
        let svd = h.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let keep = h.nrows().min(h.ncols());
        if smax == 0.0 || svd.singular_values.min() < DEGENERATE_TOL * smax || svd.singular_values.len() < keep {
            degenerate = true;
        }
        svd.pseudo_inverse(DEGENERATE_TOL * smax).unwrap_or_else(|_| CMatrix::zeros(h.ncols(), h.nrows()))
    });
    EffectiveChannel { blocks, detectors, serving, degenerate }
}

/// Post-detection gains of one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainReport {
    /// Gain at the vertical and horizontal receive polarizations.
    pub per_polarization: [f64; 2],
    /// `ḧ`, the larger of the two.
    pub gain: f64,
    /// Receive polarization achieving `ḧ` (vertical on ties).
    pub polarization: Polarization,
    /// Residual polarization interference power `X`.
    pub interference: f64,
    pub degenerate: bool,
}

impl GainReport {
    pub fn h(&self, q: Polarization) -> f64 {
        self.per_polarization[q.index()]
    }
}

/// `h_q = 1/[H†^q (H†^q)^H]_{gg}`, the best polarization and
/// `X = |[H†^{p̈} H_^{t p̈} x^t]_g|²` for the interfering symbol vector `x^t`.
/// Degenerate channels report zero gain.
pub fn gains_and_interference(det: &EffectiveChannel, interfering: &CVector, group: usize) -> Result<GainReport> {
    let width = det.detectors[0].nrows();
    if group >= width {
        return Err(Error::InvalidArgument(format!("group {group} out of range (M̄/2 = {width})")));
    }
    if interfering.len() != width {
        return Err(Error::Dimension(format!("interfering symbols have length {}, expected {width}", interfering.len())));
    }
    if det.degenerate {
        return Ok(GainReport {
            per_polarization: [0.0; 2],
            gain: 0.0,
            polarization: Polarization::Vertical,
            interference: 0.0,
            degenerate: true,
        });
    }
    let per_polarization = Polarization::BOTH.map(|q| {
        let row_energy = det.detector(q).row(group).norm_squared();
        if row_energy > 0.0 { 1.0 / row_energy } else { 0.0 }
    });
    let polarization = if per_polarization[1] > per_polarization[0] {
        Polarization::Horizontal
    } else {
        Polarization::Vertical
    };
    let leak = det.block(det.serving.other(), polarization) * interfering;
    let interference = (det.detector(polarization).row(group) * leak)[(0, 0)].norm_sqr();
    Ok(GainReport {
        per_polarization,
        gain: per_polarization[polarization.index()],
        polarization,
        interference,
        degenerate: false,
    })
}

/// Interference `𝔍` left when decoding user `target` of `subset`: the powers
/// of stronger users in the subset plus `ξ` times the already cancelled weaker
/// ones. Users are 0-based positions into the power allocation.
pub fn sic_interference(alloc: &PowerAllocation, subset: &[usize], target: usize, xi: f64) -> Result<f64> {
    if !subset.contains(&target) {
        return Err(Error::InvalidArgument(format!("user {target} not in subset {subset:?}")));
    }
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::InvalidArgument(format!("SIC error factor {xi} not in [0, 1]")));
    }
    let mut stronger = 0.0;
    let mut residual = 0.0;
    for &m in subset {
        if m >= alloc.len() {
            return Err(Error::InvalidArgument(format!("user {m} has no power coefficient")));
        }
        if m > target {
            stronger += alloc.get(m);
        } else if m < target {
            residual += alloc.get(m);
        }
    }
    Ok(stronger + xi * residual)
}

/// SINR of user `user` when decoding the message of `target ≤ user`:
/// `ρḧα_i² / (ρḧ𝔍 + ρḧX + 1)`.
pub fn sic_sinr(
    report: &GainReport,
    alloc: &PowerAllocation,
    subset: &[usize],
    user: usize,
    target: usize,
    xi: f64,
    snr: f64,
) -> Result<f64> {
    if !subset.contains(&user) {
        return Err(Error::InvalidArgument(format!("user {user} not in subset {subset:?}")));
    }
    if target > user {
        return Err(Error::InvalidArgument(format!("cannot decode user {target} before user {user}")));
    }
    if !(snr > 0.0) {
        return Err(Error::InvalidArgument(format!("SNR {snr} must be > 0")));
    }
    let j = sic_interference(alloc, subset, target, xi)?;
    Ok(sinr(report.gain, report.interference, alloc.get(target), j, snr))
}

pub(crate) fn sinr(gain: f64, interference: f64, power: f64, sic: f64, snr: f64) -> f64 {
    let s = snr * gain;
    s * power / (s * sic + s * interference + 1.0)
}

/// Instantaneous rate `log₂(1 + γ^u_u)` of a user decoding its own message.
pub fn user_rate(report: &GainReport, alloc: &PowerAllocation, subset: &[usize], user: usize, xi: f64, snr: f64) -> Result<f64> {
    Ok(sic_sinr(report, alloc, subset, user, user, xi, snr)?.ln_1p() / std::f64::consts::LN_2)
}
