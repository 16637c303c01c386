//! Forward and backward transfer of structures along linear maps,
//! composition of port-bearing Dirac structures through an interconnecting
//! structure, the tensor product, and the twist duality between the two
//! transfer directions.
//!
//! Everything is realized as null-space computations on explicitly stacked
//! block matrices so that a single numeric pathway and tolerance policy
//! covers all set-level definitions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dirac::{twist, LinearStructure};
use crate::error::StructureError;
use crate::subspace::{hstack, null_space, vstack, Subspace};

/// A linear map φ: V → W stored as its matrix (rows = dim W, cols = dim V).
/// The dual map φ*: W* → V* is the transpose under the standard dual bases.
#[derive(Debug, Clone)]
pub struct LinearMapSpec {
    pub mat: DMatrix<f64>,
}

impl LinearMapSpec {
    pub fn new(mat: DMatrix<f64>) -> LinearMapSpec {
        assert!(
            mat.iter().all(|x| x.is_finite()),
            "linear map entries must be finite"
        );
        LinearMapSpec { mat }
    }

    pub fn identity(n: usize) -> LinearMapSpec {
        LinearMapSpec {
            mat: DMatrix::identity(n, n),
        }
    }

    /// Source dimension (dim V).
    pub fn source_dim(&self) -> usize {
        self.mat.ncols()
    }

    /// Target dimension (dim W).
    pub fn target_dim(&self) -> usize {
        self.mat.nrows()
    }

    /// The dual map as a spec of its own.
    pub fn dual(&self) -> LinearMapSpec {
        LinearMapSpec {
            mat: self.mat.transpose(),
        }
    }

    /// Composition self ∘ other.
    pub fn compose_with(&self, other: &LinearMapSpec) -> LinearMapSpec {
        LinearMapSpec {
            mat: &self.mat * &other.mat,
        }
    }
}

/// Row-major serialization used by the file formats.
#[derive(Serialize, Deserialize)]
struct MapJson {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Serialize for LinearMapSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows = self.mat.nrows();
        let cols = self.mat.ncols();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(self.mat[(i, j)]);
            }
        }
        MapJson { rows, cols, data }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LinearMapSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = MapJson::deserialize(deserializer)?;
        if raw.data.len() != raw.rows * raw.cols {
            return Err(serde::de::Error::custom(format!(
                "matrix data has {} entries, expected {}",
                raw.data.len(),
                raw.rows * raw.cols
            )));
        }
        Ok(LinearMapSpec {
            mat: DMatrix::from_row_slice(raw.rows, raw.cols, &raw.data),
        })
    }
}

/// Forward image of a structure along φ: V → W:
/// Fφ(S) = {(φ v, w*) : (v, φ* w*) ∈ S}.
///
/// Dirac maps to Dirac in the linear category; isotropic and coisotropic
/// inputs keep their classification.
pub fn forward(
    phi: &LinearMapSpec,
    s: &LinearStructure,
) -> Result<LinearStructure, StructureError> {
    let nv = phi.source_dim();
    let nw = phi.target_dim();
    if s.flow_dim() != nv {
        return Err(StructureError::DimensionMismatch {
            expected: nv,
            got: s.flow_dim(),
        });
    }
    // Unknowns z = (v, w*) with the membership constraint (v, φᵀ w*) ∈ S,
    // i.e. (I - P_S) · [v; φᵀ w*] = 0.
    let eye_v = DMatrix::<f64>::identity(nv, nv);
    let zeros_a = DMatrix::<f64>::zeros(nv, nw);
    let zeros_b = DMatrix::<f64>::zeros(nv, nv);
    let phi_t = phi.mat.transpose();
    let lift = vstack(&[&hstack(&[&eye_v, &zeros_a]), &hstack(&[&zeros_b, &phi_t])]);
    let proj_residual = DMatrix::<f64>::identity(2 * nv, 2 * nv) - s.span().projector();
    let witnesses = null_space(&(proj_residual * lift));
    // Image under (v, w*) ↦ (φ v, w*).
    let zeros_c = DMatrix::<f64>::zeros(nw, nw);
    let eye_w = DMatrix::<f64>::identity(nw, nw);
    let zeros_d = DMatrix::<f64>::zeros(nw, nv);
    let image_map = vstack(&[&hstack(&[&phi.mat, &zeros_c]), &hstack(&[&zeros_d, &eye_w])]);
    let span = Subspace::canonicalize_scaled(&(image_map * witnesses.basis()), 1.0);
    LinearStructure::from_span(span)
}

/// Backward image of a structure along φ: V → W:
/// Bφ(S) = {(v, φ* w*) : (φ v, w*) ∈ S}.
pub fn backward(
    phi: &LinearMapSpec,
    s: &LinearStructure,
) -> Result<LinearStructure, StructureError> {
    let nv = phi.source_dim();
    let nw = phi.target_dim();
    if s.flow_dim() != nw {
        return Err(StructureError::DimensionMismatch {
            expected: nw,
            got: s.flow_dim(),
        });
    }
    // Unknowns z = (v, w*) with (φ v, w*) ∈ S.
    let zeros_a = DMatrix::<f64>::zeros(nw, nw);
    let eye_w = DMatrix::<f64>::identity(nw, nw);
    let zeros_b = DMatrix::<f64>::zeros(nw, nv);
    let lift = vstack(&[
        &hstack(&[&phi.mat, &zeros_a]),
        &hstack(&[&zeros_b, &eye_w]),
    ]);
    let proj_residual = DMatrix::<f64>::identity(2 * nw, 2 * nw) - s.span().projector();
    let witnesses = null_space(&(proj_residual * lift));
    // Image under (v, w*) ↦ (v, φᵀ w*).
    let eye_v = DMatrix::<f64>::identity(nv, nv);
    let zeros_c = DMatrix::<f64>::zeros(nv, nw);
    let zeros_d = DMatrix::<f64>::zeros(nv, nv);
    let phi_t = phi.mat.transpose();
    let image_map = vstack(&[&hstack(&[&eye_v, &zeros_c]), &hstack(&[&zeros_d, &phi_t])]);
    let span = Subspace::canonicalize_scaled(&(image_map * witnesses.basis()), 1.0);
    LinearStructure::from_span(span)
}

/// Dimensions of the four port blocks entering a composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposeDims {
    pub u1: usize,
    pub u2: usize,
    pub v1: usize,
    pub v2: usize,
}

/// Composition of two port-bearing Dirac structures through an
/// interconnecting Dirac structure on the shared port space:
/// the backward along (u1,u2,v1,v2) ↦ (u1,u2,u2,v2,v1,v2) followed by the
/// forward along the projection (u1,u2,v1,v2) ↦ (u1,v1), applied to
/// Da × Di × Db.
pub fn compose(
    da: &LinearStructure,
    db: &LinearStructure,
    di: &LinearStructure,
    dims: ComposeDims,
) -> Result<LinearStructure, StructureError> {
    check_compose_inputs(da, db, di, dims)?;
    let ComposeDims { u1, u2, v1, v2 } = dims;
    let src = u1 + u2 + v1 + v2;

    // φ: rows ordered as the product factors (u1,u2 | u2,v2 | v1,v2).
    let mut phi = DMatrix::<f64>::zeros(u1 + 2 * u2 + 2 * v2 + v1, src);
    let col_u1 = 0;
    let col_u2 = u1;
    let col_v1 = u1 + u2;
    let col_v2 = u1 + u2 + v1;
    let mut row = 0;
    for i in 0..u1 {
        phi[(row + i, col_u1 + i)] = 1.0;
    }
    row += u1;
    for i in 0..u2 {
        phi[(row + i, col_u2 + i)] = 1.0;
    }
    row += u2;
    for i in 0..u2 {
        phi[(row + i, col_u2 + i)] = 1.0;
    }
    row += u2;
    for i in 0..v2 {
        phi[(row + i, col_v2 + i)] = 1.0;
    }
    row += v2;
    for i in 0..v1 {
        phi[(row + i, col_v1 + i)] = 1.0;
    }
    row += v1;
    for i in 0..v2 {
        phi[(row + i, col_v2 + i)] = 1.0;
    }

    // ψ: (u1,u2,v1,v2) ↦ (u1,v1).
    let mut psi = DMatrix::<f64>::zeros(u1 + v1, src);
    for i in 0..u1 {
        psi[(i, col_u1 + i)] = 1.0;
    }
    for i in 0..v1 {
        psi[(u1 + i, col_v1 + i)] = 1.0;
    }

    let product = LinearStructure::direct_sum(&[da, di, db])?;
    let pulled = backward(&LinearMapSpec::new(phi), &product)?;
    forward(&LinearMapSpec::new(psi), &pulled)
}

/// Independent evaluation of the composition as the explicit witness set
/// {(u1,v1,α1,β1) : ∃(u2,v2,α2,β2) with (u2,v2,−α2,−β2) ∈ Di,
/// (u1,u2,α1,α2) ∈ Da, (v1,v2,β1,β2) ∈ Db}, assembled as one stacked
/// null-space problem followed by a projection. This is a deliberately
/// separate pathway from [`compose`] and is used to cross-check it.
pub fn compose_witness_set(
    da: &LinearStructure,
    db: &LinearStructure,
    di: &LinearStructure,
    dims: ComposeDims,
) -> Result<LinearStructure, StructureError> {
    check_compose_inputs(da, db, di, dims)?;
    let ComposeDims { u1, u2, v1, v2 } = dims;
    // Unknowns z = (u1, u2, v1, v2, α1, α2, β1, β2).
    let total = 2 * (u1 + u2 + v1 + v2);
    let at_u1 = 0;
    let at_u2 = u1;
    let at_v1 = u1 + u2;
    let at_v2 = u1 + u2 + v1;
    let at_a1 = u1 + u2 + v1 + v2;
    let at_a2 = at_a1 + u1;
    let at_b1 = at_a2 + u2;
    let at_b2 = at_b1 + v1;

    let embed = |slots: &[(usize, usize, f64)]| -> DMatrix<f64> {
        // Each slot is (row offset in the factor, column offset in z, sign)
        // and contributes an identity block of the given width.
        let rows: usize = slots.iter().map(|&(w, _, _)| w).sum();
        let mut m = DMatrix::<f64>::zeros(rows, total);
        let mut r = 0;
        for &(width, col, sign) in slots {
            for i in 0..width {
                m[(r + i, col + i)] = sign;
            }
            r += width;
        }
        m
    };

    // (u1, u2, α1, α2) ∈ Da
    let lift_a = embed(&[(u1, at_u1, 1.0), (u2, at_u2, 1.0), (u1, at_a1, 1.0), (u2, at_a2, 1.0)]);
    // (v1, v2, β1, β2) ∈ Db
    let lift_b = embed(&[(v1, at_v1, 1.0), (v2, at_v2, 1.0), (v1, at_b1, 1.0), (v2, at_b2, 1.0)]);
    // (u2, v2, −α2, −β2) ∈ Di
    let lift_i = embed(&[(u2, at_u2, 1.0), (v2, at_v2, 1.0), (u2, at_a2, -1.0), (v2, at_b2, -1.0)]);

    let res_a = (DMatrix::<f64>::identity(2 * (u1 + u2), 2 * (u1 + u2)) - da.span().projector())
        * lift_a;
    let res_b = (DMatrix::<f64>::identity(2 * (v1 + v2), 2 * (v1 + v2)) - db.span().projector())
        * lift_b;
    let res_i = (DMatrix::<f64>::identity(2 * (u2 + v2), 2 * (u2 + v2)) - di.span().projector())
        * lift_i;
    let witnesses = null_space(&vstack(&[&res_a, &res_i, &res_b]));

    // Project onto (u1, v1, α1, β1).
    let project = embed(&[(u1, at_u1, 1.0), (v1, at_v1, 1.0), (u1, at_a1, 1.0), (v1, at_b1, 1.0)]);
    let span = Subspace::canonicalize_scaled(&(project * witnesses.basis()), 1.0);
    LinearStructure::from_span(span)
}

fn check_compose_inputs(
    da: &LinearStructure,
    db: &LinearStructure,
    di: &LinearStructure,
    dims: ComposeDims,
) -> Result<(), StructureError> {
    for (s, expected) in [
        (da, dims.u1 + dims.u2),
        (db, dims.v1 + dims.v2),
        (di, dims.u2 + dims.v2),
    ] {
        if s.flow_dim() != expected {
            return Err(StructureError::DimensionMismatch {
                expected,
                got: s.flow_dim(),
            });
        }
        if !s.is_dirac() {
            return Err(StructureError::NotDirac {
                found: s.class().as_str(),
            });
        }
    }
    Ok(())
}

/// The interconnecting Dirac structure of the shared-port composition rule:
/// {(u2, û2, α2, α̂2) : û2 = −u2, α̂2 = α2} on U2 × U2.
pub fn shared_port_interconnection(u2: usize) -> LinearStructure {
    // Flows (u2, -u2), efforts (α2, α2): spanned per coordinate.
    let mut basis = DMatrix::<f64>::zeros(4 * u2, 2 * u2);
    for i in 0..u2 {
        basis[(i, i)] = 1.0;
        basis[(u2 + i, i)] = -1.0;
        basis[(2 * u2 + i, u2 + i)] = 1.0;
        basis[(3 * u2 + i, u2 + i)] = 1.0;
    }
    LinearStructure::from_span(Subspace::canonicalize(&basis))
        .expect("shared-port interconnection is Dirac by construction")
}

/// Tensor product D1 ⊠ D2 = {(u, α) : ∃α2 with (u, α − α2) ∈ D1,
/// (u, α2) ∈ D2}, computed as the backward of D1 × D2 along the diagonal.
pub fn tensor_product(
    d1: &LinearStructure,
    d2: &LinearStructure,
) -> Result<LinearStructure, StructureError> {
    let n = d1.flow_dim();
    if d2.flow_dim() != n {
        return Err(StructureError::DimensionMismatch {
            expected: n,
            got: d2.flow_dim(),
        });
    }
    for s in [d1, d2] {
        if !s.is_dirac() {
            return Err(StructureError::NotDirac {
                found: s.class().as_str(),
            });
        }
    }
    let product = LinearStructure::direct_sum(&[d1, d2])?;
    let diagonal = LinearMapSpec::new(vstack(&[
        &DMatrix::<f64>::identity(n, n),
        &DMatrix::<f64>::identity(n, n),
    ]));
    backward(&diagonal, &product)
}

/// Result of checking the duality identity
/// twist(Fφ(D)) = B(φᵀ)(twist(D)).
#[derive(Debug, Clone)]
pub struct DualityReport {
    pub twisted_forward: LinearStructure,
    pub backward_of_dual: LinearStructure,
    pub projector_distance: f64,
    pub equal: bool,
}

/// Checks the bridge between the forward and backward directions: pushing a
/// structure forward and twisting agrees with twisting first and pulling
/// back along the dual map.
pub fn duality_transport(
    phi: &LinearMapSpec,
    d: &LinearStructure,
) -> Result<DualityReport, StructureError> {
    let lhs = twist(&forward(phi, d)?);
    let rhs = backward(&phi.dual(), &twist(d))?;
    let projector_distance = (lhs.span().projector() - rhs.span().projector()).norm();
    let equal = lhs.span().equals(rhs.span())?;
    Ok(DualityReport {
        twisted_forward: lhs,
        backward_of_dual: rhs,
        projector_distance,
        equal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::{from_pair, StructureClass, TwoForm};
    use nalgebra::DVector;

    fn canonical_dirac(n: usize) -> LinearStructure {
        assert!(n % 2 == 0);
        LinearStructure::graph_of_form(&TwoForm::canonical_symplectic(n / 2)).unwrap()
    }

    #[test]
    fn forward_along_identity_is_identity() {
        let d = canonical_dirac(2);
        let f = forward(&LinearMapSpec::identity(2), &d).unwrap();
        assert!(f.span().equals(d.span()).unwrap());
    }

    #[test]
    fn backward_along_identity_is_identity() {
        let d = canonical_dirac(4);
        let b = backward(&LinearMapSpec::identity(4), &d).unwrap();
        assert!(b.span().equals(d.span()).unwrap());
    }

    #[test]
    fn forward_along_zero_map() {
        // φ = 0 on R², D = graph of the standard symplectic form:
        // (v, 0) ∈ D forces v = 0, so the forward is {0} ⊕ (R²)*.
        let d = canonical_dirac(2);
        let zero = LinearMapSpec::new(DMatrix::zeros(2, 2));
        let f = forward(&zero, &d).unwrap();
        let expected = {
            let mut raw = DMatrix::<f64>::zeros(4, 2);
            raw[(2, 0)] = 1.0;
            raw[(3, 1)] = 1.0;
            Subspace::canonicalize(&raw)
        };
        assert!(f.span().equals(&expected).unwrap());
        assert_eq!(f.class(), StructureClass::Dirac);
    }

    #[test]
    fn backward_along_inclusion_kills_transverse_effort() {
        // Inclusion of the line span{e1} into R² with the symplectic graph:
        // the pulled-back structure is R¹ ⊕ {0} because i*(e2*) = 0.
        let d = canonical_dirac(2);
        let incl = LinearMapSpec::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0]));
        let b = backward(&incl, &d).unwrap();
        let expected = {
            let mut raw = DMatrix::<f64>::zeros(2, 1);
            raw[(0, 0)] = 1.0;
            Subspace::canonicalize(&raw)
        };
        assert!(b.span().equals(&expected).unwrap());
        assert_eq!(b.class(), StructureClass::Dirac);
    }

    #[test]
    fn forward_of_dirac_is_dirac_with_target_dimension() {
        let d = canonical_dirac(4);
        let phi = LinearMapSpec::new(DMatrix::from_fn(3, 4, |i, j| {
            ((2 * i + 3 * j) as f64 * 0.37).sin()
        }));
        let f = forward(&phi, &d).unwrap();
        assert_eq!(f.class(), StructureClass::Dirac);
        assert_eq!(f.dim(), 3);
    }

    #[test]
    fn compose_matches_witness_oracle_on_fixed_instance() {
        // Da on U1 ⊕ U2 with u1 = u2 = 2, Db on V1 ⊕ V2 with v1 = v2 = 1,
        // Di a Dirac structure on the shared port block U2 ⊕ V2 = R³.
        let da = canonical_dirac(4);
        let db = canonical_dirac(2);
        let dims = ComposeDims {
            u1: 2,
            u2: 2,
            v1: 1,
            v2: 1,
        };
        let f = Subspace::span(3, &[DVector::from_column_slice(&[1.0, 0.0, 1.0])]);
        let mut mat = DMatrix::<f64>::zeros(3, 3);
        mat[(0, 1)] = 1.0;
        mat[(1, 0)] = -1.0;
        let di = from_pair(&f, &TwoForm::new(mat).unwrap()).unwrap();
        let lhs = compose(&da, &db, &di, dims).unwrap();
        let rhs = compose_witness_set(&da, &db, &di, dims).unwrap();
        assert!(lhs.span().equals(rhs.span()).unwrap());
        assert_eq!(lhs.class(), StructureClass::Dirac);
    }

    #[test]
    fn compose_with_trivial_second_factor_strips_ports() {
        // V1 = V2 = {0} and a zero-dimensional interconnection: the
        // composition returns Da itself (here Da has no port block either).
        let da = canonical_dirac(2);
        let trivial = LinearStructure::full_space(0);
        let dims = ComposeDims {
            u1: 2,
            u2: 0,
            v1: 0,
            v2: 0,
        };
        let out = compose(&da, &trivial, &trivial, dims).unwrap();
        assert_eq!(out.flow_dim(), 2);
        assert!(out.span().equals(da.span()).unwrap());
    }

    #[test]
    fn tensor_product_with_free_flow_structure_is_identity() {
        // D2 = V ⊕ {0} forces α2 = 0, so D1 ⊠ D2 = D1.
        let d1 = canonical_dirac(2);
        let d2 = LinearStructure::from_flow_space(&Subspace::full(2)).unwrap();
        let t = tensor_product(&d1, &d2).unwrap();
        assert!(t.span().equals(d1.span()).unwrap());
    }

    #[test]
    fn tensor_product_of_graphs_adds_forms() {
        let m1 = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let m2 = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        let d1 = LinearStructure::graph_of_form(&TwoForm::new(m1.clone()).unwrap()).unwrap();
        let d2 = LinearStructure::graph_of_form(&TwoForm::new(m2.clone()).unwrap()).unwrap();
        let t = tensor_product(&d1, &d2).unwrap();
        let sum =
            LinearStructure::graph_of_form(&TwoForm::new(&m1 + &m2).unwrap()).unwrap();
        assert!(t.span().equals(sum.span()).unwrap());
    }

    #[test]
    fn duality_identity_for_identity_map() {
        let d = canonical_dirac(2);
        let report = duality_transport(&LinearMapSpec::identity(2), &d).unwrap();
        assert!(report.equal);
        assert!(report
            .twisted_forward
            .span()
            .equals(twist(&d).span())
            .unwrap());
    }

    #[test]
    fn duality_identity_for_rectangular_map() {
        let d = canonical_dirac(4);
        let phi = LinearMapSpec::new(DMatrix::from_fn(3, 4, |i, j| {
            ((i + 5 * j) as f64 * 0.21).cos()
        }));
        let report = duality_transport(&phi, &d).unwrap();
        assert!(report.equal, "distance {}", report.projector_distance);
    }

    #[test]
    fn map_spec_json_round_trip() {
        let phi = LinearMapSpec::new(DMatrix::from_row_slice(2, 3, &[1., 2., 3., 4., 5., 6.]));
        let text = serde_json::to_string(&phi).unwrap();
        assert!(text.contains("\"rows\":2"));
        let back: LinearMapSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.mat, phi.mat);
    }
}
