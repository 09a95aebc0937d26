//! Inter-cluster nulling outer precoder, polarization subsets, inner precoders
//! and NOMA power coefficients.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceDecomposition;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Relative singular-value threshold below which a direction of the
/// interfering-cluster span counts as null.
const NULL_SPACE_TOL: f64 = 1e-10;

/// `P̃`: orthonormal columns spanning the dominant eigenmodes of the target
/// cluster inside the null space of every other cluster.
#[derive(Debug, Clone)]
pub struct OuterPrecoder {
    /// `(M/2) × (M̄/2)` matrix with orthonormal columns.
    pub matrix: CMatrix,
    /// Effective stream dimension `M̄` (both polarizations).
    pub streams: usize,
}

impl OuterPrecoder {
    /// Columns per polarization, `M̄ / 2`.
    pub fn width(&self) -> usize {
        self.streams / 2
    }
}

/// Builds the outer precoder of cluster `k`.
///
/// Fails with a [`Error::Constraint`] naming the violated budget when `M̄` is
/// odd, below the cluster count, larger than the interference-free dimension
/// or larger than twice the target rank.
pub fn build_outer_precoder(decomps: &[CovarianceDecomposition], k: usize, streams: usize) -> Result<OuterPrecoder> {
    let clusters = decomps.len();
    if k >= clusters {
        return Err(Error::InvalidArgument(format!("cluster {k} out of range ({clusters} clusters)")));
    }
    let dim = decomps[k].dim();
    if decomps.iter().any(|d| d.dim() != dim) {
        return Err(Error::Dimension("all covariances must share the array size".into()));
    }
    if streams == 0 || streams % 2 != 0 {
        return Err(Error::constraint("M̄ even", format!("M̄ = {streams} must be a positive even count")));
    }
    if streams < clusters {
        return Err(Error::constraint("K ≤ M̄", format!("K = {clusters} exceeds M̄ = {streams}")));
    }
    let interfering_rank: usize = decomps.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, d)| d.rank()).sum();
    let budget = 2 * dim as isize - 2 * interfering_rank as isize;
    if streams as isize > budget {
        return Err(Error::constraint(
            "M̄ ≤ M − 2Σr*'",
            format!("M̄ = {streams} but M − 2Σr*' = {budget} (M = {}, Σr*' = {interfering_rank})", 2 * dim),
        ));
    }
    let target_rank = decomps[k].rank();
    if streams > 2 * target_rank {
        return Err(Error::constraint("M̄ ≤ 2r*", format!("M̄ = {streams} but r* = {target_rank}")));
    }

    let null_basis = interference_null_space(decomps, k)?;
    let width = streams / 2;
    if null_basis.ncols() < width {
        return Err(Error::constraint(
            "M̄ ≤ M − 2Σr*'",
            format!("numerical null space has {} columns, need {width}", null_basis.ncols()),
        ));
    }

    // Dominant eigenvectors of the target covariance projected on the null space.
    let colouring = decomps[k].colouring();
    let projected = null_basis.adjoint() * &colouring;
    let xi = &projected * projected.adjoint();
    let xi = (&xi + xi.adjoint()).scale(0.5);
    let eig = xi.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let dominant = CMatrix::from_columns(&order[..width].iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());

    Ok(OuterPrecoder { matrix: null_basis * dominant, streams })
}

/// Orthonormal basis of the orthogonal complement of the interfering clusters' eigenspaces.
fn interference_null_space(decomps: &[CovarianceDecomposition], k: usize) -> Result<CMatrix> {
    let dim = decomps[k].dim();
    let blocks: Vec<&CMatrix> = decomps.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, d)| &d.eigvecs).collect();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    if cols == 0 {
        return Ok(CMatrix::identity(dim, dim));
    }
    // Zero-pad Ω to a square matrix so the SVD returns a complete left basis.
    let mut omega = CMatrix::zeros(dim, dim.max(cols));
    let mut offset = 0;
    for b in blocks {
        omega.view_mut((0, offset), b.shape()).copy_from(b);
        offset += b.ncols();
    }
    let svd = omega.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sigma_max = svd.singular_values.max();
    let null_cols: Vec<usize> = (0..dim)
        .filter(|&i| svd.singular_values[i] <= NULL_SPACE_TOL * sigma_max)
        .collect();
    Ok(CMatrix::from_columns(&null_cols.iter().map(|&i| u.column(i)).collect::<Vec<_>>()))
}

/// Transmit polarization of a subset, or receive polarization of a branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    #[serde(rename = "v")]
    Vertical,
    #[serde(rename = "h")]
    Horizontal,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::Vertical, Polarization::Horizontal];

    pub fn index(self) -> usize {
        match self {
            Polarization::Vertical => 0,
            Polarization::Horizontal => 1,
        }
    }

    pub fn other(self) -> Polarization {
        match self {
            Polarization::Vertical => Polarization::Horizontal,
            Polarization::Horizontal => Polarization::Vertical,
        }
    }
}

/// Users of one group split into vertical and horizontal subsets. Each list
/// holds user indices ordered from weakest to strongest large-scale gain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetAssignment {
    pub vertical: Vec<usize>,
    pub horizontal: Vec<usize>,
}

impl SubsetAssignment {
    pub fn polarization_of(&self, user: usize) -> Option<Polarization> {
        if self.vertical.contains(&user) {
            Some(Polarization::Vertical)
        } else if self.horizontal.contains(&user) {
            Some(Polarization::Horizontal)
        } else {
            None
        }
    }

    pub fn subset(&self, p: Polarization) -> &[usize] {
        match p {
            Polarization::Vertical => &self.vertical,
            Polarization::Horizontal => &self.horizontal,
        }
    }
}

/// Indices of `gains` sorted ascending; ties keep index order.
pub fn ascending_order(gains: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[a].total_cmp(&gains[b]));
    order
}

/// Sorts users by BS-U gain and alternates them between polarizations:
/// odd sorted positions (1st, 3rd, ...) go vertical, even ones horizontal.
pub fn assign_subsets(gains: &[f64]) -> SubsetAssignment {
    let order = ascending_order(gains);
    let mut out = SubsetAssignment { vertical: Vec::new(), horizontal: Vec::new() };
    for (pos, user) in order.into_iter().enumerate() {
        if pos % 2 == 0 {
            out.vertical.push(user);
        } else {
            out.horizontal.push(user);
        }
    }
    out
}

/// Inner precoding vector of user `user` in group `group` (zero-based): a single
/// one at position `group` of the half matching the user's subset.
pub fn build_inner_precoder(group: usize, user: usize, streams: usize, assignment: &SubsetAssignment) -> Result<DVector<f64>> {
    let half = streams / 2;
    if group >= half {
        return Err(Error::constraint("G ≤ M̄/2", format!("group {} needs M̄/2 ≥ {}, have {half}", group + 1, group + 1)));
    }
    let pol = assignment
        .polarization_of(user)
        .ok_or_else(|| Error::InvalidArgument(format!("user {user} belongs to no subset")))?;
    let mut v = DVector::zeros(streams);
    v[pol.index() * half + group] = 1.0;
    Ok(v)
}

/// Squared NOMA amplitude coefficients, indexed by user from weakest to
/// strongest, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    alpha_sq: Vec<f64>,
}

impl PowerAllocation {
    /// Accepts coefficients whose sum is within 1e-9 of one and that do not
    /// increase from weaker to stronger users, then renormalizes exactly.
    pub fn new(alpha_sq: Vec<f64>) -> Result<Self> {
        if alpha_sq.is_empty() {
            return Err(Error::InvalidArgument("empty power allocation".into()));
        }
        if alpha_sq.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::constraint("α² > 0", format!("{alpha_sq:?}")));
        }
        let total: f64 = alpha_sq.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::constraint("Σα² = 1", format!("coefficients sum to {total}")));
        }
        if alpha_sq.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::constraint("α² non-increasing", format!("weaker users must get more power: {alpha_sq:?}")));
        }
        Ok(PowerAllocation { alpha_sq: alpha_sq.iter().map(|a| a / total).collect() })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.alpha_sq
    }

    pub fn get(&self, user: usize) -> f64 {
        self.alpha_sq[user]
    }

    pub fn len(&self) -> usize {
        self.alpha_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_sq.is_empty()
    }
}

impl Default for PowerAllocation {
    fn default() -> Self {
        PowerAllocation { alpha_sq: vec![0.4, 0.35, 0.2, 0.05] }
    }
}
