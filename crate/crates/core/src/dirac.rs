//! Linear Dirac, isotropic and coisotropic structures on V ⊕ V*.
//!
//! A [`LinearStructure`] is a subspace of R^{2n} in the block convention
//! "flows first, efforts last", together with its classification under the
//! symmetric pairing <<(v1,a1),(v2,a2)>> = a1(v2) + a2(v1). A Dirac structure
//! equals its own pairing-orthogonal; equivalently it is maximally isotropic
//! (dimension n with vanishing pairing).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::StructureError;
use crate::policy::policy;
use crate::subspace::{hstack, null_space, pairing_matrix, vstack, Subspace};

/// Classification of a subspace of V ⊕ V* under the symmetric pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureClass {
    Isotropic,
    Coisotropic,
    Dirac,
    General,
}

impl StructureClass {
    /// Dirac structures are isotropic.
    pub fn is_isotropic(self) -> bool {
        matches!(self, StructureClass::Isotropic | StructureClass::Dirac)
    }

    /// Dirac structures are coisotropic.
    pub fn is_coisotropic(self) -> bool {
        matches!(self, StructureClass::Coisotropic | StructureClass::Dirac)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StructureClass::Isotropic => "isotropic",
            StructureClass::Coisotropic => "coisotropic",
            StructureClass::Dirac => "dirac",
            StructureClass::General => "general",
        }
    }
}

/// A skew bilinear form ω on R^n. The matrix convention is
/// ω^♭(u) = mat · u as a covector, i.e. ω(u, v) = (mat · u)ᵀ v.
///
/// This is the convention every other module relies on; in particular the
/// canonical symplectic form on (q, p) ∈ R^{2m} has mat = [[0, -I], [I, 0]].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoForm {
    pub n: usize,
    pub mat: DMatrix<f64>,
}

impl TwoForm {
    pub fn new(mat: DMatrix<f64>) -> Result<TwoForm, StructureError> {
        check_skew(&mat)?;
        Ok(TwoForm {
            n: mat.nrows(),
            mat,
        })
    }

    pub fn zero(n: usize) -> TwoForm {
        TwoForm {
            n,
            mat: DMatrix::zeros(n, n),
        }
    }

    /// The canonical symplectic form on (q, p) coordinates, dq ∧ dp:
    /// ω(u, w) = u_q · w_p − w_q · u_p.
    pub fn canonical_symplectic(half: usize) -> TwoForm {
        let n = 2 * half;
        let mut mat = DMatrix::zeros(n, n);
        for i in 0..half {
            mat[(i, half + i)] = -1.0;
            mat[(half + i, i)] = 1.0;
        }
        TwoForm { n, mat }
    }

    pub fn apply(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (&self.mat * u).dot(v)
    }
}

/// A skew two-tensor Λ on the dual: ♯_Λ(α) = mat · α and
/// Λ(β, α) = βᵀ (mat · α).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bivector {
    pub n: usize,
    pub mat: DMatrix<f64>,
}

impl Bivector {
    pub fn new(mat: DMatrix<f64>) -> Result<Bivector, StructureError> {
        check_skew(&mat)?;
        Ok(Bivector {
            n: mat.nrows(),
            mat,
        })
    }

    pub fn zero(n: usize) -> Bivector {
        Bivector {
            n,
            mat: DMatrix::zeros(n, n),
        }
    }
}

fn check_skew(mat: &DMatrix<f64>) -> Result<(), StructureError> {
    if mat.nrows() != mat.ncols() {
        return Err(StructureError::DimensionMismatch {
            expected: mat.nrows(),
            got: mat.ncols(),
        });
    }
    let asym = (mat + mat.transpose()).amax();
    if asym > policy().skew_tol {
        return Err(StructureError::NotSkew(asym));
    }
    Ok(())
}

/// A subspace of V ⊕ V* together with its cached classification.
#[derive(Debug, Clone, Serialize)]
pub struct LinearStructure {
    n: usize,
    span: Subspace,
    #[serde(rename = "class")]
    class: StructureClass,
}

#[derive(Deserialize)]
struct LinearStructureJson {
    n: usize,
    span: Subspace,
    class: StructureClass,
}

impl<'de> Deserialize<'de> for LinearStructure {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = LinearStructureJson::deserialize(deserializer)?;
        if raw.span.ambient_dim() != 2 * raw.n {
            return Err(serde::de::Error::custom(format!(
                "span lives in dimension {}, expected {} for n = {}",
                raw.span.ambient_dim(),
                2 * raw.n,
                raw.n
            )));
        }
        let built = LinearStructure::from_span(raw.span).map_err(serde::de::Error::custom)?;
        if built.class != raw.class {
            return Err(serde::de::Error::custom(format!(
                "declared class `{}` but the span classifies as `{}`",
                raw.class.as_str(),
                built.class.as_str()
            )));
        }
        Ok(built)
    }
}

impl LinearStructure {
    /// Wraps a subspace of R^{2n}, classifying it on construction.
    pub fn from_span(span: Subspace) -> Result<LinearStructure, StructureError> {
        if span.ambient_dim() % 2 != 0 {
            return Err(StructureError::OddAmbientDimension(span.ambient_dim()));
        }
        let n = span.ambient_dim() / 2;
        let class = classify(&span)?;
        Ok(LinearStructure { n, span, class })
    }

    /// Flow-space dimension n (the ambient is R^{2n}).
    pub fn flow_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.span.dim()
    }

    pub fn span(&self) -> &Subspace {
        &self.span
    }

    pub fn class(&self) -> StructureClass {
        self.class
    }

    pub fn is_dirac(&self) -> bool {
        self.class == StructureClass::Dirac
    }

    /// Recomputes the classification from scratch (audit path; the cached tag
    /// is assigned at construction).
    pub fn reclassify(&self) -> Result<StructureClass, StructureError> {
        classify(&self.span)
    }

    /// Distance of a flow/effort pair from the structure.
    pub fn residual(&self, flow: &DVector<f64>, effort: &DVector<f64>) -> f64 {
        let mut z = DVector::zeros(2 * self.n);
        z.rows_mut(0, self.n).copy_from(flow);
        z.rows_mut(self.n, self.n).copy_from(effort);
        self.span.distance(&z)
    }

    /// Projection of the structure onto the flow factor. The block is cut
    /// out of an orthonormal basis, so rank decisions use unit scale.
    pub fn flow_projection(&self) -> Subspace {
        let b = self.span.basis();
        let raw = b.rows(0, self.n).into_owned();
        Subspace::canonicalize_scaled(&raw, 1.0)
    }

    /// Projection of the structure onto the effort factor.
    pub fn effort_projection(&self) -> Subspace {
        let b = self.span.basis();
        let raw = b.rows(self.n, self.n).into_owned();
        Subspace::canonicalize_scaled(&raw, 1.0)
    }

    /// The structure F ⊕ F° (zero form on a distribution F).
    pub fn from_flow_space(flow: &Subspace) -> Result<LinearStructure, StructureError> {
        from_pair(flow, &TwoForm::zero(flow.ambient_dim()))
    }

    /// Graph of a presymplectic form: {(v, ω^♭ v)}.
    pub fn graph_of_form(omega: &TwoForm) -> Result<LinearStructure, StructureError> {
        from_pair(&Subspace::full(omega.n), omega)
    }

    /// Graph of a bivector: {(♯_Λ α, α)}.
    pub fn graph_of_bivector(lambda: &Bivector) -> Result<LinearStructure, StructureError> {
        from_bivector(lambda, &Subspace::full(lambda.n))
    }

    /// The full space V ⊕ V* (the maximal coisotropic structure).
    pub fn full_space(n: usize) -> LinearStructure {
        LinearStructure {
            n,
            span: Subspace::full(2 * n),
            class: if n == 0 {
                StructureClass::Dirac
            } else {
                StructureClass::Coisotropic
            },
        }
    }

    /// Block-diagonal product of structures: flows and efforts of the factors
    /// are concatenated in order, keeping the flows-first convention on the
    /// result.
    pub fn direct_sum(factors: &[&LinearStructure]) -> Result<LinearStructure, StructureError> {
        if factors.is_empty() {
            return Err(StructureError::EmptyProduct);
        }
        let n_total: usize = factors.iter().map(|f| f.n).sum();
        let dim_total: usize = factors.iter().map(|f| f.dim()).sum();
        let mut basis = DMatrix::zeros(2 * n_total, dim_total);
        let mut flow_at = 0;
        let mut col_at = 0;
        for f in factors {
            let b = f.span.basis();
            basis
                .view_mut((flow_at, col_at), (f.n, f.dim()))
                .copy_from(&b.rows(0, f.n));
            basis
                .view_mut((n_total + flow_at, col_at), (f.n, f.dim()))
                .copy_from(&b.rows(f.n, f.n));
            flow_at += f.n;
            col_at += f.dim();
        }
        LinearStructure::from_span(Subspace::canonicalize(&basis))
    }

    /// Maximum |<<z_i, z_j>>| over the spanning pairs of the structure; zero
    /// (within tolerance) exactly for isotropic structures.
    pub fn max_pairing_residual(&self) -> f64 {
        let b = self.span.basis();
        if b.ncols() == 0 {
            return 0.0;
        }
        let p = pairing_matrix(2 * self.n);
        (b.transpose() * p * b).amax()
    }
}

/// Classifies a subspace of R^{2n} by the inclusion tests against its
/// pairing-orthogonal. Isotropy is read off the pairing Gram matrix,
/// coisotropy from isotropy of the orthogonal; both together give Dirac.
pub fn classify(span: &Subspace) -> Result<StructureClass, StructureError> {
    if span.ambient_dim() % 2 != 0 {
        return Err(StructureError::OddAmbientDimension(span.ambient_dim()));
    }
    let iso = pairing_vanishes(span);
    let perp = span.pairing_orthogonal()?;
    let coiso = pairing_vanishes(&perp);
    Ok(match (iso, coiso) {
        (true, true) => StructureClass::Dirac,
        (true, false) => StructureClass::Isotropic,
        (false, true) => StructureClass::Coisotropic,
        (false, false) => StructureClass::General,
    })
}

fn pairing_vanishes(span: &Subspace) -> bool {
    if span.dim() == 0 {
        return true;
    }
    let p = pairing_matrix(span.ambient_dim());
    let gram = span.basis().transpose() * p * span.basis();
    gram.amax() <= policy().residual_tol
}

/// The unique Dirac structure with flow range F and induced form ω|_F:
/// D = {u ⊕ α : u ∈ F, α(v) = ω(u, v) for all v ∈ F}.
pub fn from_pair(flow: &Subspace, omega: &TwoForm) -> Result<LinearStructure, StructureError> {
    let n = flow.ambient_dim();
    if omega.n != n {
        return Err(StructureError::DimensionMismatch {
            expected: n,
            got: omega.n,
        });
    }
    check_skew(&omega.mat)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let bf_t = flow.basis().transpose();
    let r = flow.dim();
    // Rows: (I - P_F) u = 0  and  B_Fᵀ (α - mat·u) = 0.
    let zeros_top = DMatrix::zeros(n, n);
    let top = hstack(&[&(&eye - flow.projector()), &zeros_top]);
    let lower_left = -(&bf_t * &omega.mat);
    let lower = hstack(&[&lower_left, &bf_t.clone_owned()]);
    let stacked = if r == 0 { top } else { vstack(&[&top, &lower]) };
    let span = null_space(&stacked);
    LinearStructure::from_span(span)
}

/// The Dirac structure determined by a bivector restricted to a
/// codistribution: D = {(v, α) : α ∈ C, β(v) = Λ(β, α) for all β ∈ C}.
pub fn from_bivector(
    lambda: &Bivector,
    codistribution: &Subspace,
) -> Result<LinearStructure, StructureError> {
    let n = codistribution.ambient_dim();
    if lambda.n != n {
        return Err(StructureError::DimensionMismatch {
            expected: n,
            got: lambda.n,
        });
    }
    check_skew(&lambda.mat)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let bc_t = codistribution.basis().transpose();
    let r = codistribution.dim();
    // Rows: (I - P_C) α = 0  and  B_Cᵀ (v - mat·α) = 0.
    let zeros_top = DMatrix::zeros(n, n);
    let top = hstack(&[&zeros_top, &(&eye - codistribution.projector())]);
    let lower_right = -(&bc_t * &lambda.mat);
    let lower = hstack(&[&bc_t.clone_owned(), &lower_right]);
    let stacked = if r == 0 { top } else { vstack(&[&top, &lower]) };
    let span = null_space(&stacked);
    LinearStructure::from_span(span)
}

/// The twist: (v, α) maps to (α, v), turning a structure on V into one on V*.
/// Classification is preserved because the pairing matrix commutes with the
/// block swap.
pub fn twist(s: &LinearStructure) -> LinearStructure {
    let n = s.n;
    let b = s.span().basis();
    let mut swapped = DMatrix::zeros(2 * n, b.ncols());
    swapped.view_mut((0, 0), (n, b.ncols())).copy_from(&b.rows(n, n));
    swapped.view_mut((n, 0), (n, b.ncols())).copy_from(&b.rows(0, n));
    LinearStructure {
        n,
        span: Subspace::canonicalize(&swapped),
        class: s.class,
    }
}

/// Flow range and induced skew form of an isotropic (in particular Dirac)
/// structure. The form is expressed in the orthonormal basis of the returned
/// range, with the same matrix convention as [`TwoForm`].
#[derive(Debug, Clone)]
pub struct RangeForm {
    pub range: Subspace,
    /// Skew matrix of the induced form in `range.basis()` coordinates.
    pub form: TwoForm,
    /// Representative efforts: column i is a covector α with
    /// (range.basis()[i], α) in the structure. Unique modulo the gauge
    /// efforts; its flow-range block is `form`.
    pub effort_rep: DMatrix<f64>,
}

impl RangeForm {
    /// The induced form pushed back to ambient coordinates
    /// (B · mat · Bᵀ); restricted to the range it agrees with `form`.
    pub fn ambient_form(&self) -> TwoForm {
        let b = self.range.basis();
        TwoForm {
            n: self.range.ambient_dim(),
            mat: b * &self.form.mat * b.transpose(),
        }
    }
}

/// Extracts (F_D, ω_D) from an isotropic structure. Well-definedness of the
/// form (independence of the effort representative) is verified; it fails
/// exactly when the input is not isotropic.
pub fn range_and_form(s: &LinearStructure) -> Result<RangeForm, StructureError> {
    let n = s.n;
    let b = s.span().basis();
    let d = b.ncols();
    let b_flow = b.rows(0, n).into_owned();
    let b_effort = b.rows(n, n).into_owned();
    let range = Subspace::canonicalize_scaled(&b_flow, 1.0);
    let r = range.dim();

    // Gauge efforts: {α : (0, α) ∈ S}. For the form to be well defined they
    // must annihilate the flow range.
    let effort_axis = {
        let mut raw = DMatrix::zeros(2 * n, n);
        raw.view_mut((n, 0), (n, n))
            .copy_from(&DMatrix::identity(n, n));
        Subspace::canonicalize(&raw)
    };
    let gauge = s.span().intersect(&effort_axis)?;
    if gauge.dim() > 0 {
        let gauge_efforts = gauge.basis().rows(n, n).into_owned();
        let leak = (range.basis().transpose() * &gauge_efforts).amax();
        if leak > policy().residual_tol {
            return Err(StructureError::IllDefinedForm(leak));
        }
    }

    // Solve B_flow c_i = f_i (consistent by construction), α_i = B_effort c_i,
    // then mat[j][i] = f_jᵀ α_i.
    let mut mat = DMatrix::zeros(r, r);
    let mut efforts = DMatrix::zeros(n, r);
    if r > 0 && d > 0 {
        let coeffs =
            crate::linalg::min_norm_solve_mat(&b_flow, range.basis(), policy().rank_rel_tol); // d x r
        efforts = &b_effort * coeffs; // n x r, column i = α_i
        mat = range.basis().transpose() * &efforts;
        // Exact skewness up to the verified tolerance; symmetrize the noise.
        let skew_defect = (&mat + &mat.transpose()).amax();
        if skew_defect > policy().residual_tol {
            return Err(StructureError::IllDefinedForm(skew_defect));
        }
        mat = 0.5 * (&mat - &mat.transpose());
    }
    Ok(RangeForm {
        range,
        form: TwoForm { n: r, mat },
        effort_rep: efforts,
    })
}

/// Decomposition of an isotropic structure Σ with flow range F, relative to
/// the orthogonal splitting V = F ⊕ F₁.
///
/// The classical direct-sum picture Σ = D_{ω_F} ⊕ ({0} ⊕ F₂°), with F₂ ⊆ F₁
/// and the annihilator taken inside F₁, covers the structures whose efforts
/// split along V = F ⊕ F₁. A general isotropic structure additionally
/// carries a flow-dependent effort component over F₁ (isotropy constrains
/// efforts only against the flow range), recorded here in `effort_map`. The
/// reconstruction Σ = {(u, α) : u ∈ F, α − effort_map·u ∈ gauge} is exact
/// for every isotropic structure and reduces to the direct-sum picture when
/// the cross component vanishes.
#[derive(Debug, Clone)]
pub struct IsotropicParts {
    /// Flow range F of the structure.
    pub flow: Subspace,
    /// Induced form on the flow range, in `flow.basis()` coordinates.
    pub form: TwoForm,
    /// Orthogonal complement F₁ of the flow range.
    pub complement: Subspace,
    /// The subspace F₂ ⊆ F₁ whose effort directions are absent from the
    /// structure (the gauge is its annihilator inside F₁). Zero exactly for
    /// Dirac structures.
    pub gap: Subspace,
    /// Gauge efforts {α : (0, α) ∈ Σ}.
    pub gauge: Subspace,
    /// Representative effort map A with (u, A u) ∈ Σ for u in the flow
    /// range, defined modulo the gauge. Its flow-range block is `form`; the
    /// complement block is the cross component absent from the classical
    /// direct-sum family.
    pub effort_map: DMatrix<f64>,
}

impl IsotropicParts {
    /// Rebuilds the structure from the parts:
    /// {(u, α) : u ∈ F, α − A u ∈ gauge}.
    pub fn reconstruct(&self) -> Result<LinearStructure, StructureError> {
        let n = self.flow.ambient_dim();
        let eye = DMatrix::<f64>::identity(n, n);
        let zeros_n = DMatrix::zeros(n, n);
        let mut rows: Vec<DMatrix<f64>> = Vec::new();
        rows.push(hstack(&[&(&eye - self.flow.projector()), &zeros_n]));
        let off_gauge = self.gauge.complement().basis().transpose().into_owned();
        if off_gauge.nrows() > 0 {
            let left = -(&off_gauge * &self.effort_map);
            rows.push(hstack(&[&left, &off_gauge]));
        }
        let refs: Vec<&DMatrix<f64>> = rows.iter().collect();
        LinearStructure::from_span(null_space(&vstack(&refs)))
    }

    /// Frobenius size of the cross component of the effort map; zero exactly
    /// when the structure splits as D_{ω_F} ⊕ ({0} ⊕ F₂°), the family of the
    /// classical description.
    pub fn cross_defect(&self) -> f64 {
        // Compare against the gauge as well: the cross block matters only
        // modulo gauge directions.
        let cross = self.complement.projector() * &self.effort_map * self.flow.projector();
        let off = &cross - self.gauge.projector() * &cross;
        off.norm()
    }
}

/// Splits an isotropic structure into flow range, induced form, orthogonal
/// complement, effort gap, gauge, and representative effort map; see
/// [`IsotropicParts`].
pub fn isotropic_decompose(s: &LinearStructure) -> Result<IsotropicParts, StructureError> {
    if !s.class().is_isotropic() {
        return Err(StructureError::NotIsotropic {
            found: s.class().as_str(),
        });
    }
    let rf = range_and_form(s)?;
    let complement = rf.range.complement();
    // Gauge efforts {α : (0, α) ∈ Σ} fill the annihilator of F₂ inside F₁;
    // F₂ is recovered as the complement of the gauge inside F₁.
    let n = s.n;
    let effort_axis = {
        let mut raw = DMatrix::zeros(2 * n, n);
        raw.view_mut((n, 0), (n, n))
            .copy_from(&DMatrix::identity(n, n));
        Subspace::canonicalize(&raw)
    };
    let gauge_pairs = s.span().intersect(&effort_axis)?;
    let gauge =
        Subspace::canonicalize_scaled(&gauge_pairs.basis().rows(n, n).into_owned(), 1.0);
    let gap = complement.intersect(&gauge.complement())?;
    let effort_map = &rf.effort_rep * rf.range.basis().transpose();
    Ok(IsotropicParts {
        flow: rf.range,
        form: rf.form,
        complement,
        gap,
        gauge,
        effort_map,
    })
}

/// Decomposition of a coisotropic structure S, obtained by decomposing the
/// isotropic orthogonal S^⊥ and forming the orthogonal again. In the split
/// case this is the classical picture
/// S = D_{ω_F} ⊕ ({0} ⊕ F₃*) ⊕ (F₂ ⊕ F₂*) for the splitting F₁ = F₂ ⊕ F₃.
#[derive(Debug, Clone)]
pub struct CoisotropicParts {
    /// Flow range F of the isotropic orthogonal (the flow range of S itself
    /// is F ⊕ gap).
    pub flow: Subspace,
    /// Induced form on `flow`, in `flow.basis()` coordinates.
    pub form: TwoForm,
    /// Orthogonal complement F₁ of `flow`.
    pub complement: Subspace,
    /// F₂ ⊆ F₁: the directions carrying the maximal coisotropic factor
    /// F₂ ⊕ F₂*. Zero exactly for Dirac structures.
    pub gap: Subspace,
    /// F₃ ⊆ F₁ with F₂ ⊕ F₃ = F₁ (orthogonal choice).
    pub gap_complement: Subspace,
    /// Full decomposition of the isotropic orthogonal S^⊥.
    pub orthogonal: IsotropicParts,
}

impl CoisotropicParts {
    /// Rebuilds the coisotropic structure as the pairing-orthogonal of the
    /// reconstructed isotropic orthogonal.
    pub fn reconstruct(&self) -> Result<LinearStructure, StructureError> {
        let iso = self.orthogonal.reconstruct()?;
        LinearStructure::from_span(iso.span().pairing_orthogonal()?)
    }
}

/// Splits a coisotropic structure; see [`CoisotropicParts`].
pub fn coisotropic_decompose(s: &LinearStructure) -> Result<CoisotropicParts, StructureError> {
    if !s.class().is_coisotropic() {
        return Err(StructureError::NotCoisotropic {
            found: s.class().as_str(),
        });
    }
    let orth = LinearStructure::from_span(s.span().pairing_orthogonal()?)?;
    let parts = isotropic_decompose(&orth)?;
    let gap_complement = parts.complement.intersect(&parts.gap.complement())?;
    Ok(CoisotropicParts {
        flow: parts.flow.clone(),
        form: parts.form.clone(),
        complement: parts.complement.clone(),
        gap: parts.gap.clone(),
        gap_complement,
        orthogonal: parts,
    })
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
    fn two_form_rejects_non_skew() {
        let mat = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(TwoForm::new(mat).is_err());
    }

    #[test]
    fn canonical_symplectic_convention() {
        // ω(e_q, e_p) = 1 on R^2 with coordinates (q, p).
        let omega = TwoForm::canonical_symplectic(1);
        assert_abs_diff_eq!(omega.apply(&e(2, 0), &e(2, 1)), 1.0);
        assert_abs_diff_eq!(omega.apply(&e(2, 1), &e(2, 0)), -1.0);
    }

    #[test]
    fn from_pair_with_zero_form_is_flow_plus_annihilator() {
        // F = span{e1} in R^2, ω = 0: D = F ⊕ F° = span{(e1, 0), (0, e2*)}.
        let f = Subspace::span(2, &[e(2, 0)]);
        let d = from_pair(&f, &TwoForm::zero(2)).unwrap();
        assert_eq!(d.class(), StructureClass::Dirac);
        let expected = Subspace::span(4, &[e(4, 0), e(4, 3)]);
        assert!(d.span().equals(&expected).unwrap());
    }

    #[test]
    fn from_pair_full_space_symplectic() {
        // F = R^2, ω(e1, e2) = 1: D = span{(1,0 | 0,1), (0,1 | -1,0)}.
        let mut mat = DMatrix::zeros(2, 2);
        mat[(1, 0)] = 1.0;
        mat[(0, 1)] = -1.0;
        let omega = TwoForm::new(mat).unwrap();
        let d = from_pair(&Subspace::full(2), &omega).unwrap();
        assert_eq!(d.class(), StructureClass::Dirac);
        let expected = Subspace::span(
            4,
            &[
                DVector::from_column_slice(&[1.0, 0.0, 0.0, 1.0]),
                DVector::from_column_slice(&[0.0, 1.0, -1.0, 0.0]),
            ],
        );
        assert!(d.span().equals(&expected).unwrap());
    }

    #[test]
    fn from_bivector_zero_is_pure_efforts() {
        let d = from_bivector(&Bivector::zero(3), &Subspace::full(3)).unwrap();
        assert_eq!(d.class(), StructureClass::Dirac);
        let expected = Subspace::span(6, &[e(6, 3), e(6, 4), e(6, 5)]);
        assert!(d.span().equals(&expected).unwrap());
    }

    #[test]
    fn from_bivector_graph() {
        // Λ with ♯_Λ(e1) = e2, ♯_Λ(e2) = -e1:
        // graph of ♯_Λ = span{(0,1 | 1,0), (-1,0 | 0,1)}.
        let mat = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let d = from_bivector(&Bivector::new(mat).unwrap(), &Subspace::full(2)).unwrap();
        assert_eq!(d.class(), StructureClass::Dirac);
        let expected = Subspace::span(
            4,
            &[
                DVector::from_column_slice(&[0.0, 1.0, 1.0, 0.0]),
                DVector::from_column_slice(&[-1.0, 0.0, 0.0, 1.0]),
            ],
        );
        assert!(d.span().equals(&expected).unwrap());
    }

    #[test]
    fn from_bivector_degenerate_flow_projection() {
        // Rank-2 bivector on R^3: flow projection of the graph is the image
        // of ♯_Λ, i.e. span{e1, e2}.
        let mat =
            DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let d = from_bivector(&Bivector::new(mat).unwrap(), &Subspace::full(3)).unwrap();
        assert_eq!(d.class(), StructureClass::Dirac);
        let flow = d.flow_projection();
        assert!(flow
            .equals(&Subspace::span(3, &[e(3, 0), e(3, 1)]))
            .unwrap());
    }

    #[test]
    fn classify_extremes() {
        assert_eq!(
            classify(&Subspace::zero(4)).unwrap(),
            StructureClass::Isotropic
        );
        assert_eq!(
            classify(&Subspace::full(4)).unwrap(),
            StructureClass::Coisotropic
        );
        assert!(classify(&Subspace::full(3)).is_err());
    }

    #[test]
    fn classify_graph_of_skew_form_is_dirac() {
        let mat = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 2.0, -0.5, -2.0, 0.0, 1.0, 0.5, -1.0, 0.0],
        );
        let d = LinearStructure::graph_of_form(&TwoForm::new(mat).unwrap()).unwrap();
        assert_eq!(d.class(), StructureClass::Dirac);
        assert_eq!(d.dim(), 3);
        assert!(d.max_pairing_residual() <= 1e-9);
    }

    #[test]
    fn twist_swaps_flows_and_efforts() {
        // twist(V ⊕ 0) = 0 ⊕ V.
        let v_only = LinearStructure::from_span(Subspace::span(4, &[e(4, 0), e(4, 1)])).unwrap();
        let t = twist(&v_only);
        let expected = Subspace::span(4, &[e(4, 2), e(4, 3)]);
        assert!(t.span().equals(&expected).unwrap());
        assert_eq!(t.class(), v_only.class());
    }

    #[test]
    fn twist_of_graph_is_graph_of_inverse() {
        // twist(graph ω) = {(ω^♭ v, v)}. Read as a graph over its own flow
        // space this is the linear map ω^{-1}, i.e. the skew two-tensor
        // ω^{-1} on the dual; read against the effort parametrization it is
        // the sharp map ω^♭ itself. Both identities pin the conventions.
        let mat = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.5, 0.0, -1.0, 0.0, 0.0, -0.25, -0.5, 0.0, 0.0, 2.0, 0.0, 0.25,
                -2.0, 0.0,
            ],
        );
        let omega = TwoForm::new(mat.clone()).unwrap();
        let d = LinearStructure::graph_of_form(&omega).unwrap();
        let t = twist(&d);
        let inv = mat.clone().try_inverse().unwrap();
        let inv_graph =
            LinearStructure::graph_of_form(&TwoForm::new(inv).unwrap()).unwrap();
        assert!(t.span().equals(inv_graph.span()).unwrap());
        let sharp_graph =
            LinearStructure::graph_of_bivector(&Bivector::new(mat).unwrap()).unwrap();
        assert!(t.span().equals(sharp_graph.span()).unwrap());
    }

    #[test]
    fn range_and_form_of_annihilator_structure() {
        let f = Subspace::span(3, &[e(3, 0), e(3, 2)]);
        let d = LinearStructure::from_flow_space(&f).unwrap();
        let rf = range_and_form(&d).unwrap();
        assert!(rf.range.equals(&f).unwrap());
        assert_abs_diff_eq!(rf.form.mat.amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn range_and_form_recovers_graph_form() {
        let mat = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.5, -0.25, -1.5, 0.0, 0.75, 0.25, -0.75, 0.0],
        );
        let omega = TwoForm::new(mat.clone()).unwrap();
        let d = LinearStructure::graph_of_form(&omega).unwrap();
        let rf = range_and_form(&d).unwrap();
        assert!(rf.range.equals(&Subspace::full(3)).unwrap());
        assert_abs_diff_eq!(rf.ambient_form().mat, mat, epsilon = 1e-9);
    }

    #[test]
    fn range_and_form_round_trip() {
        let mat = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.3, -0.7, 0.1, -0.3, 0.0, 0.2, -0.9, 0.7, -0.2, 0.0, 0.4, -0.1, 0.9,
                -0.4, 0.0,
            ],
        );
        let f = Subspace::span(4, &[e(4, 0) + e(4, 1), e(4, 2) - 0.5 * e(4, 3)]);
        let d = from_pair(&f, &TwoForm::new(mat).unwrap()).unwrap();
        let rf = range_and_form(&d).unwrap();
        let rebuilt = from_pair(&rf.range, &rf.ambient_form()).unwrap();
        assert!(rebuilt.span().equals(d.span()).unwrap());
    }

    #[test]
    fn range_and_form_rejects_non_isotropic() {
        let full = LinearStructure::full_space(2);
        assert!(range_and_form(&full).is_err());
    }

    #[test]
    fn isotropic_decompose_zero_structure() {
        // Σ = {0} in R^2 ⊕ (R^2)*: F = 0, F1 = F2 = R^2.
        let s = LinearStructure::from_span(Subspace::zero(4)).unwrap();
        let parts = isotropic_decompose(&s).unwrap();
        assert_eq!(parts.flow.dim(), 0);
        assert!(parts.complement.equals(&Subspace::full(2)).unwrap());
        assert!(parts.gap.equals(&Subspace::full(2)).unwrap());
        assert!(parts.reconstruct().unwrap().span().equals(s.span()).unwrap());
    }

    #[test]
    fn isotropic_decompose_dirac_has_zero_gap() {
        let omega = TwoForm::canonical_symplectic(2);
        let d = LinearStructure::graph_of_form(&omega).unwrap();
        let parts = isotropic_decompose(&d).unwrap();
        assert_eq!(parts.gap.dim(), 0);
        assert!(parts.reconstruct().unwrap().span().equals(d.span()).unwrap());
    }

    #[test]
    fn isotropic_decompose_line_example() {
        // Σ = span{(e1, 0)} ⊂ R^2 ⊕ (R^2)*: F = span{e1}, ω = 0,
        // F1 = span{e2}, F2 = span{e2}; Σ^⊥ = span{(e1,0),(e2,0),(0,e2*)}.
        let s = LinearStructure::from_span(Subspace::span(4, &[e(4, 0)])).unwrap();
        assert_eq!(s.class(), StructureClass::Isotropic);
        let parts = isotropic_decompose(&s).unwrap();
        assert!(parts.flow.equals(&Subspace::span(2, &[e(2, 0)])).unwrap());
        assert_abs_diff_eq!(parts.form.mat.amax(), 0.0, epsilon = 1e-12);
        assert!(parts
            .complement
            .equals(&Subspace::span(2, &[e(2, 1)]))
            .unwrap());
        assert!(parts.gap.equals(&Subspace::span(2, &[e(2, 1)])).unwrap());
        let perp = s.span().pairing_orthogonal().unwrap();
        let expected = Subspace::span(4, &[e(4, 0), e(4, 1), e(4, 3)]);
        assert!(perp.equals(&expected).unwrap());
        assert!(parts.reconstruct().unwrap().span().equals(s.span()).unwrap());
    }

    #[test]
    fn coisotropic_decompose_full_space() {
        let s = LinearStructure::full_space(3);
        let parts = coisotropic_decompose(&s).unwrap();
        assert_eq!(parts.flow.dim(), 0);
        assert!(parts.gap.equals(&Subspace::full(3)).unwrap());
        assert_eq!(parts.gap_complement.dim(), 0);
        assert!(parts.reconstruct().unwrap().span().equals(s.span()).unwrap());
    }

    #[test]
    fn coisotropic_decompose_dirac() {
        let omega = TwoForm::canonical_symplectic(1);
        let d = LinearStructure::graph_of_form(&omega).unwrap();
        let parts = coisotropic_decompose(&d).unwrap();
        assert_eq!(parts.gap.dim(), 0);
        assert!(parts.reconstruct().unwrap().span().equals(d.span()).unwrap());
    }

    #[test]
    fn direct_sum_of_dirac_is_dirac() {
        let d1 = LinearStructure::graph_of_form(&TwoForm::canonical_symplectic(1)).unwrap();
        let d2 = LinearStructure::from_flow_space(&Subspace::span(1, &[e(1, 0)])).unwrap();
        let sum = LinearStructure::direct_sum(&[&d1, &d2]).unwrap();
        assert_eq!(sum.flow_dim(), 3);
        assert_eq!(sum.class(), StructureClass::Dirac);
    }

    #[test]
    fn json_round_trip_keeps_class() {
        let d = LinearStructure::graph_of_form(&TwoForm::canonical_symplectic(2)).unwrap();
        let text = serde_json::to_string(&d).unwrap();
        assert!(text.contains("\"class\":\"dirac\""));
        let back: LinearStructure = serde_json::from_str(&text).unwrap();
        assert!(back.span().equals(d.span()).unwrap());
        assert_eq!(back.class(), StructureClass::Dirac);
    }
}
