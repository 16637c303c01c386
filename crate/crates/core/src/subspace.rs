//! Numerical subspace arithmetic over R^k.
//!
//! A [`Subspace`] is stored canonically as an orthonormal column basis
//! obtained from a rank-revealing SVD. Equality of subspaces is decided by
//! comparing orthogonal projectors, which is stable under the long chains of
//! kernel/image computations performed by the transfer operations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::StructureError;
use crate::policy::policy;

/// A linear subspace of R^k, canonically represented by an orthonormal basis.
#[derive(Debug, Clone)]
pub struct Subspace {
    ambient_dim: usize,
    /// ambient_dim x r matrix with orthonormal columns.
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Column space of an arbitrary k x m matrix, via rank-revealing
    /// column-pivoted QR. Rank is decided by pivot magnitudes above
    /// `rank_rel_tol` times the leading pivot (the pivots of a column-pivoted
    /// R track the singular values); the zero matrix yields the zero
    /// subspace.
    pub fn canonicalize(raw: &DMatrix<f64>) -> Subspace {
        let k = raw.nrows();
        let basis = crate::linalg::column_space_basis(raw, policy().rank_rel_tol);
        Subspace {
            ambient_dim: k,
            basis,
        }
    }

    /// [`Subspace::canonicalize`] for matrices with a known natural scale
    /// (such as blocks sliced out of an orthonormal basis, where the scale
    /// is 1): pivot magnitudes are compared against
    /// `rank_rel_tol * max(leading pivot, scale)`, so an all-noise block
    /// canonicalizes to the zero subspace instead of normalized noise.
    pub fn canonicalize_scaled(raw: &DMatrix<f64>, scale: f64) -> Subspace {
        let k = raw.nrows();
        let basis =
            crate::linalg::column_space_basis_scaled(raw, policy().rank_rel_tol, scale);
        Subspace {
            ambient_dim: k,
            basis,
        }
    }

    /// Subspace spanned by the given vectors (all of the same length).
    pub fn span(ambient_dim: usize, vectors: &[DVector<f64>]) -> Subspace {
        if vectors.is_empty() {
            return Subspace::zero(ambient_dim);
        }
        let mut raw = DMatrix::zeros(ambient_dim, vectors.len());
        for (j, v) in vectors.iter().enumerate() {
            assert_eq!(v.len(), ambient_dim, "span vector has wrong length");
            raw.set_column(j, v);
        }
        Subspace::canonicalize(&raw)
    }

    /// The zero subspace of R^k.
    pub fn zero(ambient_dim: usize) -> Subspace {
        Subspace {
            ambient_dim,
            basis: DMatrix::zeros(ambient_dim, 0),
        }
    }

    /// The full space R^k.
    pub fn full(ambient_dim: usize) -> Subspace {
        Subspace {
            ambient_dim,
            basis: DMatrix::identity(ambient_dim, ambient_dim),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthonormal basis, one column per dimension.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Orthogonal projector basis * basis^T.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    fn check_same_ambient(&self, other: &Subspace) -> Result<(), StructureError> {
        if self.ambient_dim != other.ambient_dim {
            return Err(StructureError::DimensionMismatch {
                expected: self.ambient_dim,
                got: other.ambient_dim,
            });
        }
        Ok(())
    }

    /// Smallest subspace containing both operands.
    pub fn sum(&self, other: &Subspace) -> Result<Subspace, StructureError> {
        self.check_same_ambient(other)?;
        let mut raw = DMatrix::zeros(self.ambient_dim, self.dim() + other.dim());
        raw.view_mut((0, 0), (self.ambient_dim, self.dim()))
            .copy_from(&self.basis);
        raw.view_mut((0, self.dim()), (self.ambient_dim, other.dim()))
            .copy_from(&other.basis);
        Ok(Subspace::canonicalize(&raw))
    }

    /// Largest subspace contained in both operands, computed as the null
    /// space of the stacked projector complements.
    pub fn intersect(&self, other: &Subspace) -> Result<Subspace, StructureError> {
        self.check_same_ambient(other)?;
        let k = self.ambient_dim;
        let eye = DMatrix::<f64>::identity(k, k);
        let mut stacked = DMatrix::zeros(2 * k, k);
        stacked
            .view_mut((0, 0), (k, k))
            .copy_from(&(&eye - self.projector()));
        stacked
            .view_mut((k, 0), (k, k))
            .copy_from(&(&eye - other.projector()));
        Ok(null_space(&stacked))
    }

    /// Euclidean orthogonal complement.
    ///
    /// I - P is again an orthogonal projector, so its spectrum sits at 0 and
    /// 1; eigenvectors above 1/2 span the complement regardless of rounding
    /// noise (a relative rank cutoff would misread the complement of a full
    /// space).
    pub fn complement(&self) -> Subspace {
        let k = self.ambient_dim;
        if self.dim() == 0 {
            return Subspace::full(k);
        }
        let eye = DMatrix::<f64>::identity(k, k);
        let residual = &eye - self.projector();
        Subspace {
            ambient_dim: k,
            basis: crate::linalg::projector_range_basis(&residual),
        }
    }

    /// Annihilator F° = {α : α(v) = 0 for all v in F}, expressed in the dual
    /// coordinates induced by the standard dual basis. Under that
    /// identification it coincides with the orthogonal complement.
    pub fn annihilator(&self) -> Subspace {
        self.complement()
    }

    /// Orthogonal with respect to the symmetric flow/effort pairing on
    /// R^{2n}: <<(v1,a1),(v2,a2)>> = a1(v2) + a2(v1). The first n coordinates
    /// are flows, the last n efforts.
    pub fn pairing_orthogonal(&self) -> Result<Subspace, StructureError> {
        if self.ambient_dim % 2 != 0 {
            return Err(StructureError::OddAmbientDimension(self.ambient_dim));
        }
        let p = pairing_matrix(self.ambient_dim);
        // S^perp = null space of B^T P.
        Ok(null_space(&(self.basis.transpose() * p)))
    }

    /// True iff the projectors agree within the projector tolerance
    /// (Frobenius norm).
    pub fn equals(&self, other: &Subspace) -> Result<bool, StructureError> {
        self.check_same_ambient(other)?;
        Ok((self.projector() - other.projector()).norm() <= policy().projector_tol)
    }

    /// True iff every basis vector of `other` lies in `self` within the
    /// projector tolerance.
    pub fn contains(&self, other: &Subspace) -> Result<bool, StructureError> {
        self.check_same_ambient(other)?;
        if other.dim() == 0 {
            return Ok(true);
        }
        let eye = DMatrix::<f64>::identity(self.ambient_dim, self.ambient_dim);
        let leak = (&eye - self.projector()) * &other.basis;
        Ok(leak.column_iter().all(|c| c.norm() <= policy().projector_tol))
    }

    /// Distance of a vector from the subspace.
    pub fn distance(&self, v: &DVector<f64>) -> f64 {
        let proj = &self.basis * (self.basis.transpose() * v);
        (v - proj).norm()
    }
}

/// Null space of an arbitrary matrix, as a subspace of the domain. Computed
/// as the orthogonal complement of the row space so that rank decisions go
/// through the same canonicalization path as everything else.
pub fn null_space(mat: &DMatrix<f64>) -> Subspace {
    Subspace::canonicalize(&mat.transpose()).complement()
}

/// The symmetric pairing matrix [[0, I], [I, 0]] on R^{2n}.
pub fn pairing_matrix(two_n: usize) -> DMatrix<f64> {
    assert!(two_n % 2 == 0, "pairing matrix needs an even dimension");
    let n = two_n / 2;
    let mut p = DMatrix::zeros(two_n, two_n);
    for i in 0..n {
        p[(i, n + i)] = 1.0;
        p[(n + i, i)] = 1.0;
    }
    p
}

/// Horizontal concatenation helper used throughout the crate.
pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    assert!(!blocks.is_empty());
    let rows = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, at), (rows, b.ncols())).copy_from(*b);
        at += b.ncols();
    }
    out
}

/// Vertical concatenation helper.
pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    assert!(!blocks.is_empty());
    let cols = blocks[0].ncols();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((at, 0), (b.nrows(), cols)).copy_from(*b);
        at += b.nrows();
    }
    out
}

#[derive(Serialize, Deserialize)]
struct SubspaceJson {
    ambient_dim: usize,
    /// One inner array per basis column.
    basis: Vec<Vec<f64>>,
}

impl Serialize for Subspace {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let cols = self
            .basis
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect();
        SubspaceJson {
            ambient_dim: self.ambient_dim,
            basis: cols,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Subspace {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = SubspaceJson::deserialize(deserializer)?;
        let mut mat = DMatrix::zeros(raw.ambient_dim, raw.basis.len());
        for (j, col) in raw.basis.iter().enumerate() {
            if col.len() != raw.ambient_dim {
                return Err(serde::de::Error::custom(format!(
                    "basis column {} has length {}, expected {}",
                    j,
                    col.len(),
                    raw.ambient_dim
                )));
            }
            for (i, &x) in col.iter().enumerate() {
                mat[(i, j)] = x;
            }
        }
        // Re-canonicalize so that hand-written files are accepted as long as
        // they span the intended subspace.
        Ok(Subspace::canonicalize(&mat))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    #[test]
    fn canonicalize_zero_matrix() {
        let raw = DMatrix::<f64>::zeros(3, 2);
        let s = Subspace::canonicalize(&raw);
        assert_eq!(s.ambient_dim(), 3);
        assert_eq!(s.dim(), 0);
    }

    #[test]
    fn canonicalize_identity_is_full() {
        let s = Subspace::canonicalize(&DMatrix::identity(2, 2));
        assert_eq!(s.dim(), 2);
        assert!(s.equals(&Subspace::full(2)).unwrap());
    }

    #[test]
    fn canonicalize_rank_one_pair() {
        // Columns (1,2,0) and (2,4,0) span a single line.
        let raw = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 0.0, 2.0, 4.0, 0.0]);
        let s = Subspace::canonicalize(&raw);
        assert_eq!(s.dim(), 1);
        let direction = DVector::from_column_slice(&[1.0, 2.0, 0.0]) / 5.0f64.sqrt();
        assert_abs_diff_eq!(s.distance(&direction), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn orthonormality_invariant() {
        let raw = DMatrix::from_fn(5, 3, |i, j| ((i * 3 + j) as f64).sin());
        let s = Subspace::canonicalize(&raw);
        let gram = s.basis().transpose() * s.basis();
        assert_abs_diff_eq!(gram, DMatrix::identity(s.dim(), s.dim()), epsilon = 1e-10);
    }

    #[test]
    fn sum_of_axes_is_plane() {
        let a = Subspace::span(2, &[e(2, 0)]);
        let b = Subspace::span(2, &[e(2, 1)]);
        let s = a.sum(&b).unwrap();
        assert!(s.equals(&Subspace::full(2)).unwrap());
    }

    #[test]
    fn sum_with_zero_is_identity() {
        let a = Subspace::span(3, &[e(3, 0), e(3, 2)]);
        let s = a.sum(&Subspace::zero(3)).unwrap();
        assert!(s.equals(&a).unwrap());
    }

    #[test]
    fn intersect_coordinate_planes() {
        let a = Subspace::span(3, &[e(3, 0), e(3, 1)]);
        let b = Subspace::span(3, &[e(3, 1), e(3, 2)]);
        let cap = a.intersect(&b).unwrap();
        assert_eq!(cap.dim(), 1);
        assert!(cap.equals(&Subspace::span(3, &[e(3, 1)])).unwrap());
    }

    #[test]
    fn intersect_with_full_is_identity() {
        let a = Subspace::span(4, &[e(4, 1), e(4, 3)]);
        assert!(a.intersect(&Subspace::full(4)).unwrap().equals(&a).unwrap());
    }

    #[test]
    fn annihilator_extremes() {
        assert!(Subspace::zero(2)
            .annihilator()
            .equals(&Subspace::full(2))
            .unwrap());
        assert!(Subspace::full(5)
            .annihilator()
            .equals(&Subspace::zero(5))
            .unwrap());
    }

    #[test]
    fn annihilator_of_diagonal_line() {
        let f = Subspace::span(4, &[DVector::from_element(4, 1.0)]);
        let ann = f.annihilator();
        assert_eq!(ann.dim(), 3);
        // Every annihilator vector has coordinates summing to zero.
        for c in ann.basis().column_iter() {
            assert_abs_diff_eq!(c.sum(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn pairing_orthogonal_of_pure_flows() {
        // (R^n ⊕ 0)^perp = R^n ⊕ 0: the pairing vanishes on pure flows.
        let n = 3;
        let flows = Subspace::span(2 * n, &[e(6, 0), e(6, 1), e(6, 2)]);
        let perp = flows.pairing_orthogonal().unwrap();
        assert!(perp.equals(&flows).unwrap());
    }

    #[test]
    fn pairing_orthogonal_of_everything_is_zero() {
        let s = Subspace::full(8);
        assert_eq!(s.pairing_orthogonal().unwrap().dim(), 0);
    }

    #[test]
    fn pairing_orthogonal_rejects_odd_dimension() {
        assert!(Subspace::full(3).pairing_orthogonal().is_err());
    }

    #[test]
    fn equals_is_scale_invariant_and_sharp() {
        let a = Subspace::span(2, &[e(2, 0)]);
        let b = Subspace::span(2, &[2.0 * e(2, 0)]);
        assert!(a.equals(&b).unwrap());
        let c = Subspace::span(2, &[e(2, 0) + 1e-6 * e(2, 1)]);
        assert!(!a.equals(&c).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = Subspace::full(2);
        let b = Subspace::full(3);
        assert!(a.sum(&b).is_err());
        assert!(a.intersect(&b).is_err());
        assert!(a.equals(&b).is_err());
    }

    #[test]
    fn json_round_trip() {
        let raw = DMatrix::from_fn(4, 2, |i, j| (i as f64) - 1.5 * (j as f64));
        let s = Subspace::canonicalize(&raw);
        let text = serde_json::to_string(&s).unwrap();
        let back: Subspace = serde_json::from_str(&text).unwrap();
        assert!(s.equals(&back).unwrap());
    }
}
