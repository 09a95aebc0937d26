//! One-ring spatial correlation per cluster and its truncated eigen-decomposition.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_asymmetry, kron_identity2, CMatrix, C64};
use crate::quadrature::gauss_legendre;

/// Quadrature order for each covariance entry.
pub const COVARIANCE_NODES: usize = 64;
/// Default fraction of the trace retained by the effective rank.
pub const DEFAULT_ENERGY_FRACTION: f64 = 0.999;
/// Eigenvalues at or below this fraction of the largest are treated as zero.
const EIGEN_FLOOR: f64 = 1e-10;

/// Uniform linear array of co-located dual-polarized pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// Number of dual-polarized pairs, `M / 2`.
    pub pairs: usize,
    /// Element spacing in carrier wavelengths.
    pub spacing: f64,
}

impl ArrayGeometry {
    pub fn new(pairs: usize, spacing: f64) -> Result<Self> {
        let g = ArrayGeometry { pairs, spacing };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(Error::InvalidGeometry("array needs at least one pair".into()));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::InvalidGeometry(format!("spacing {} must be finite and > 0", self.spacing)));
        }
        Ok(())
    }
}

/// Scattering ring around a cluster of users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterGeometry {
    /// Angle of the cluster centre from broadside, radians.
    pub azimuth: f64,
    /// Scattering radius, meters.
    pub radius: f64,
    /// Distance from the BS to the cluster centre, meters.
    pub distance: f64,
}

impl ClusterGeometry {
    pub fn validate(&self) -> Result<()> {
        let ClusterGeometry { azimuth, radius, distance } = *self;
        if !(azimuth.is_finite() && radius.is_finite() && distance.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite cluster geometry".into()));
        }
        if radius <= 0.0 {
            return Err(Error::InvalidGeometry(format!("radius {radius} must be > 0")));
        }
        if distance <= radius {
            return Err(Error::InvalidGeometry(format!("distance {distance} must exceed radius {radius}")));
        }
        if azimuth.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::InvalidGeometry(format!("azimuth {azimuth} outside (-pi/2, pi/2)")));
        }
        Ok(())
    }

    /// Half angular spread `arctan(radius / distance)`.
    pub fn angular_spread(&self) -> f64 {
        (self.radius / self.distance).atan()
    }
}

/// Eigen-structure of a per-polarization covariance.
#[derive(Debug, Clone)]
pub struct CovarianceDecomposition {
    /// The full covariance `R`.
    pub r: CMatrix,
    /// Retained eigenvalues, descending and strictly positive.
    pub eigvals: Vec<f64>,
    /// Matching orthonormal eigenvectors, one per column.
    pub eigvecs: CMatrix,
}

impl CovarianceDecomposition {
    /// Effective rank `r*`.
    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    /// `U Λ^{1/2}`, the Karhunen–Loève colouring matrix.
    pub fn colouring(&self) -> CMatrix {
        let mut out = self.eigvecs.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= C64::from(self.eigvals[j].sqrt());
        }
        out
    }

    /// `U Λ U^H`, the covariance restricted to the retained eigenmodes.
    pub fn truncated(&self) -> CMatrix {
        let c = self.colouring();
        &c * c.adjoint()
    }
}

/// One-ring covariance with uniformly distributed angles of departure:
/// `[R]_{mn} = (1/2Δ) ∫ exp(-j 2π D (m-n) sin θ) dθ` over `θ0 ± Δ`.
pub fn one_ring_covariance(array: &ArrayGeometry, cluster: &ClusterGeometry) -> Result<CMatrix> {
    array.validate()?;
    cluster.validate()?;
    let n = array.pairs;
    let spread = cluster.angular_spread();
    let (nodes, weights) = gauss_legendre(COVARIANCE_NODES);
    let sines: Vec<f64> = nodes.iter().map(|x| (cluster.azimuth + spread * x).sin()).collect();

    // Toeplitz: only the first column is integrated.
    let two_pi_d = 2.0 * std::f64::consts::PI * array.spacing;
    let lags: Vec<C64> = (0..n)
        .map(|lag| {
            let mut acc = C64::new(0.0, 0.0);
            for (s, w) in sines.iter().zip(&weights) {
                acc += C64::from_polar(0.5 * w, -two_pi_d * lag as f64 * s);
            }
            acc
        })
        .collect();
    let mut r = CMatrix::from_fn(n, n, |i, j| if i >= j { lags[i - j] } else { lags[j - i].conj() });
    for i in 0..n {
        r[(i, i)] = C64::new(1.0, 0.0);
    }
    Ok(r)
}

/// Eigen-decomposes a Hermitian PSD covariance and keeps the smallest number
/// of dominant modes whose eigenvalue sum reaches `energy_fraction` of the trace.
pub fn eigendecompose(r: &CMatrix, energy_fraction: f64) -> Result<CovarianceDecomposition> {
    if !r.is_square() {
        return Err(Error::Dimension(format!("covariance must be square, got {:?}", r.shape())));
    }
    if !(energy_fraction > 0.0 && energy_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("energy fraction {energy_fraction} not in (0, 1]")));
    }
    let asym = hermitian_asymmetry(r);
    if asym > 1e-10 {
        return Err(Error::NotHermitian(asym));
    }
    let sym = (r + r.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let lmax = eig.eigenvalues[order[0]].max(0.0);
    let floor = EIGEN_FLOOR * lmax;
    let kept: Vec<usize> = order.into_iter().filter(|&i| eig.eigenvalues[i] > floor).collect();
    let total: f64 = kept.iter().map(|&i| eig.eigenvalues[i]).sum();

    let mut rank = kept.len();
    let mut acc = 0.0;
    for (count, &i) in kept.iter().enumerate() {
        acc += eig.eigenvalues[i];
        if acc >= energy_fraction * total {
            rank = count + 1;
            break;
        }
    }
    let kept = &kept[..rank];
    let eigvals = kept.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigvecs = CMatrix::from_columns(&kept.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    Ok(CovarianceDecomposition { r: r.clone(), eigvals, eigvecs })
}

/// `ζ (χ + 1) (I_2 ⊗ R)`, the covariance of a full dual-polarized link.
pub fn polarized_covariance(decomp: &CovarianceDecomposition, zeta: f64, chi: f64) -> Result<CMatrix> {
    if !(zeta > 0.0) {
        return Err(Error::InvalidArgument(format!("link gain {zeta} must be > 0")));
    }
    if !(0.0..=1.0).contains(&chi) {
        return Err(Error::InvalidArgument(format!("leakage {chi} not in [0, 1]")));
    }
    Ok(kron_identity2(&decomp.r).scale(zeta * (chi + 1.0)))
}

/// Steering vector `exp(-j 2π D m sin θ)`, used as the zero-spread limit.
pub fn steering_vector(array: &ArrayGeometry, azimuth: f64) -> DVector<C64> {
    let phase = 2.0 * std::f64::consts::PI * array.spacing * azimuth.sin();
    DVector::from_fn(array.pairs, |m, _| C64::from_polar(1.0, -phase * m as f64))
}

/// Real eigenvalues of a Hermitian matrix in descending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = DMatrix::from(m.clone()).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}
