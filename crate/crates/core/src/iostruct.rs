//! Input-output structures: a Dirac structure on the state flow space, a
//! port structure, and a coupling map between them, in a forward flavor
//! (coupling g: ports → states, effective structure by pushforward) or a
//! backward flavor (coupling p: states → ports, effective structure by
//! pullback). Open variants carry the full coisotropic port space instead of
//! a Dirac port structure; interconnection closes them with a chosen Dirac
//! structure on the ports.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dirac::LinearStructure;
use crate::error::StructureError;
use crate::linalg::min_norm_solve;
use crate::subspace::{hstack, null_space, vstack};

fn vcat(parts: &[&DVector<f64>]) -> DVector<f64> {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(len);
    let mut at = 0;
    for p in parts {
        out.rows_mut(at, p.len()).copy_from(*p);
        at += p.len();
    }
    out
}
use crate::transfer::{backward, forward, LinearMapSpec};

/// Residual bound for accepting a membership witness.
pub const WITNESS_TOL: f64 = 1e-8;

/// Flavor of an input-output structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IoKind {
    /// Forward, closed ports (Dirac port structure).
    Fio,
    /// Forward, open ports (full coisotropic port space).
    Ofio,
    /// Backward, closed ports.
    Bio,
    /// Backward, open ports.
    Obio,
}

impl IoKind {
    pub fn is_forward(self) -> bool {
        matches!(self, IoKind::Fio | IoKind::Ofio)
    }

    pub fn is_open(self) -> bool {
        matches!(self, IoKind::Ofio | IoKind::Obio)
    }
}

/// The 5-tuple record: kind, dimensions, state Dirac structure, port
/// structure and coupling map (g: U2 → U1 for forward kinds, p: U1 → U2 for
/// backward kinds).
#[derive(Debug, Clone, Serialize)]
pub struct IoStructure {
    kind: IoKind,
    u1_dim: usize,
    u2_dim: usize,
    d_u1: LinearStructure,
    port_struct: LinearStructure,
    coupling: LinearMapSpec,
}

impl IoStructure {
    pub fn new(
        kind: IoKind,
        d_u1: LinearStructure,
        port_struct: LinearStructure,
        coupling: LinearMapSpec,
    ) -> Result<IoStructure, StructureError> {
        let u1_dim = d_u1.flow_dim();
        let u2_dim = port_struct.flow_dim();
        if !d_u1.is_dirac() {
            return Err(StructureError::NotDirac {
                found: d_u1.class().as_str(),
            });
        }
        if kind.is_open() {
            if port_struct.dim() != 2 * u2_dim {
                return Err(StructureError::OpenPortNotFull);
            }
        } else if !port_struct.is_dirac() {
            return Err(StructureError::NotDirac {
                found: port_struct.class().as_str(),
            });
        }
        let (expected_rows, expected_cols) = if kind.is_forward() {
            (u1_dim, u2_dim)
        } else {
            (u2_dim, u1_dim)
        };
        if coupling.target_dim() != expected_rows || coupling.source_dim() != expected_cols {
            return Err(StructureError::CouplingShape {
                rows: coupling.target_dim(),
                cols: coupling.source_dim(),
                expected_rows,
                expected_cols,
            });
        }
        Ok(IoStructure {
            kind,
            u1_dim,
            u2_dim,
            d_u1,
            port_struct,
            coupling,
        })
    }

    /// Forward structure with an open (full coisotropic) port space.
    pub fn open_forward(
        d_u1: LinearStructure,
        u2_dim: usize,
        g: LinearMapSpec,
    ) -> Result<IoStructure, StructureError> {
        IoStructure::new(IoKind::Ofio, d_u1, LinearStructure::full_space(u2_dim), g)
    }

    /// Backward structure with an open port space.
    pub fn open_backward(
        d_u1: LinearStructure,
        u2_dim: usize,
        p: LinearMapSpec,
    ) -> Result<IoStructure, StructureError> {
        IoStructure::new(IoKind::Obio, d_u1, LinearStructure::full_space(u2_dim), p)
    }

    pub fn kind(&self) -> IoKind {
        self.kind
    }

    pub fn u1_dim(&self) -> usize {
        self.u1_dim
    }

    pub fn u2_dim(&self) -> usize {
        self.u2_dim
    }

    pub fn d_u1(&self) -> &LinearStructure {
        &self.d_u1
    }

    pub fn port_struct(&self) -> &LinearStructure {
        &self.port_struct
    }

    pub fn coupling(&self) -> &LinearMapSpec {
        &self.coupling
    }

    /// The assembled total map: Φ(u1 ⊕ u2) = u1 + g(u2) for forward kinds,
    /// Ψ(u1) = u1 ⊕ p(u1) for backward kinds.
    pub fn total_map(&self) -> LinearMapSpec {
        if self.kind.is_forward() {
            let eye = DMatrix::<f64>::identity(self.u1_dim, self.u1_dim);
            LinearMapSpec::new(hstack(&[&eye, &self.coupling.mat]))
        } else {
            let eye = DMatrix::<f64>::identity(self.u1_dim, self.u1_dim);
            LinearMapSpec::new(vstack(&[&eye, &self.coupling.mat]))
        }
    }

    /// The structure on U1 induced by the record: the pushforward of
    /// D_{U1} ⊕ D_{U2} along Φ for forward kinds, the pullback along Ψ for
    /// backward kinds. Dirac for closed kinds, coisotropic for open kinds.
    pub fn effective_structure(&self) -> Result<LinearStructure, StructureError> {
        let product = LinearStructure::direct_sum(&[&self.d_u1, &self.port_struct])?;
        if self.kind.is_forward() {
            forward(&self.total_map(), &product)
        } else {
            backward(&self.total_map(), &product)
        }
    }

    /// Port witness for a state flow/effort pair: the (u2, α2) satisfying
    /// the defining conditions when (u1, α1) belongs to the effective
    /// structure, or `None` when the best residual exceeds [`WITNESS_TOL`].
    pub fn membership_witness(
        &self,
        u1: &DVector<f64>,
        alpha1: &DVector<f64>,
    ) -> Option<PortWitness> {
        let w = self.witness_unchecked(u1, alpha1);
        if w.residuals.iter().all(|&r| r <= WITNESS_TOL) {
            Some(w)
        } else {
            None
        }
    }

    /// The least-squares port witness without the residual gate; the caller
    /// inspects the residuals.
    pub fn witness_unchecked(&self, u1: &DVector<f64>, alpha1: &DVector<f64>) -> PortWitness {
        assert_eq!(u1.len(), self.u1_dim, "flow vector length");
        assert_eq!(alpha1.len(), self.u1_dim, "effort vector length");
        let n1 = self.u1_dim;
        let n2 = self.u2_dim;
        let res_d1 =
            DMatrix::<f64>::identity(2 * n1, 2 * n1) - self.d_u1.span().projector();
        let res_port =
            DMatrix::<f64>::identity(2 * n2, 2 * n2) - self.port_struct.span().projector();
        let g = &self.coupling.mat;

        let (u2, alpha2) = if self.kind.is_forward() {
            // α2 = gᵀ α1 is forced; solve for u2 in least squares:
            //   (I − P_port) [u2; gᵀα1] = 0
            //   (I − P_D1) ([u1; α1] − [g u2; 0]) = 0
            let alpha2 = g.transpose() * alpha1;
            let lift_port = {
                let mut m = DMatrix::<f64>::zeros(2 * n2, n2);
                m.view_mut((0, 0), (n2, n2))
                    .copy_from(&DMatrix::identity(n2, n2));
                &res_port * m
            };
            let rhs_port = -(&res_port
                * {
                    let mut z = DVector::<f64>::zeros(2 * n2);
                    z.rows_mut(n2, n2).copy_from(&alpha2);
                    z
                });
            let lift_d1 = {
                let mut m = DMatrix::<f64>::zeros(2 * n1, n2);
                m.view_mut((0, 0), (n1, n2)).copy_from(g);
                &res_d1 * m
            };
            let rhs_d1 = &res_d1 * {
                let mut z = DVector::<f64>::zeros(2 * n1);
                z.rows_mut(0, n1).copy_from(u1);
                z.rows_mut(n1, n1).copy_from(alpha1);
                z
            };
            let a = vstack(&[&lift_port, &lift_d1]);
            let b = vcat(&[&rhs_port, &rhs_d1]);
            let u2 = min_norm_solve(&a, &b, crate::policy::policy().rank_rel_tol);
            (u2, alpha2)
        } else {
            // u2 = p u1 is forced; solve for α2:
            //   (I − P_port) [p u1; α2] = 0
            //   (I − P_D1) ([u1; α1] − [0; pᵀ α2]) = 0
            let u2 = g * u1;
            let lift_port = {
                let mut m = DMatrix::<f64>::zeros(2 * n2, n2);
                m.view_mut((n2, 0), (n2, n2))
                    .copy_from(&DMatrix::identity(n2, n2));
                &res_port * m
            };
            let rhs_port = -(&res_port
                * {
                    let mut z = DVector::<f64>::zeros(2 * n2);
                    z.rows_mut(0, n2).copy_from(&u2);
                    z
                });
            let lift_d1 = {
                let mut m = DMatrix::<f64>::zeros(2 * n1, n2);
                m.view_mut((n1, 0), (n1, n2)).copy_from(&g.transpose());
                &res_d1 * m
            };
            let rhs_d1 = &res_d1 * {
                let mut z = DVector::<f64>::zeros(2 * n1);
                z.rows_mut(0, n1).copy_from(u1);
                z.rows_mut(n1, n1).copy_from(alpha1);
                z
            };
            let a = vstack(&[&lift_port, &lift_d1]);
            let b = vcat(&[&rhs_port, &rhs_d1]);
            let alpha2 = min_norm_solve(&a, &b, crate::policy::policy().rank_rel_tol);
            (u2, alpha2)
        };

        let residuals = self.witness_residuals(u1, alpha1, &u2, &alpha2);
        PortWitness {
            u2,
            alpha2,
            residuals,
        }
    }

    /// Residuals of the three defining conditions for a candidate witness,
    /// in the order (state condition, port condition, coupling condition).
    pub fn witness_residuals(
        &self,
        u1: &DVector<f64>,
        alpha1: &DVector<f64>,
        u2: &DVector<f64>,
        alpha2: &DVector<f64>,
    ) -> [f64; 3] {
        let g = &self.coupling.mat;
        if self.kind.is_forward() {
            let r1 = self.d_u1.residual(&(u1 - g * u2), alpha1);
            let r2 = self.port_struct.residual(u2, alpha2);
            let r3 = (g.transpose() * alpha1 - alpha2).norm();
            [r1, r2, r3]
        } else {
            let r1 = self
                .d_u1
                .residual(u1, &(alpha1 - g.transpose() * alpha2));
            let r2 = self.port_struct.residual(u2, alpha2);
            let r3 = (g * u1 - u2).norm();
            [r1, r2, r3]
        }
    }

    /// Block product of open structures: states, ports and couplings are
    /// concatenated in list order; the port space stays fully open.
    pub fn product(factors: &[&IoStructure]) -> Result<IoStructure, StructureError> {
        let first = *factors.first().ok_or(StructureError::EmptyProduct)?;
        if !first.kind.is_open() {
            return Err(StructureError::NotOpen);
        }
        if factors.iter().any(|f| f.kind != first.kind) {
            return Err(StructureError::MixedKinds);
        }
        let states: Vec<&LinearStructure> = factors.iter().map(|f| &f.d_u1).collect();
        let d_u1 = LinearStructure::direct_sum(&states)?;
        let u1_total: usize = factors.iter().map(|f| f.u1_dim).sum();
        let u2_total: usize = factors.iter().map(|f| f.u2_dim).sum();
        let mut coupling = if first.kind.is_forward() {
            DMatrix::<f64>::zeros(u1_total, u2_total)
        } else {
            DMatrix::<f64>::zeros(u2_total, u1_total)
        };
        let mut at_row = 0;
        let mut at_col = 0;
        for f in factors {
            let m = &f.coupling.mat;
            coupling
                .view_mut((at_row, at_col), (m.nrows(), m.ncols()))
                .copy_from(m);
            at_row += m.nrows();
            at_col += m.ncols();
        }
        IoStructure::new(
            first.kind,
            d_u1,
            LinearStructure::full_space(u2_total),
            LinearMapSpec::new(coupling),
        )
    }

    /// Closes the ports of an open structure with a chosen Dirac structure
    /// on the total port space (power conservation holds structurally: a
    /// Dirac port structure pairs its flows and efforts to zero).
    pub fn interconnect(
        &self,
        d_ports: &LinearStructure,
    ) -> Result<IoStructure, StructureError> {
        if !self.kind.is_open() {
            return Err(StructureError::NotOpen);
        }
        if d_ports.flow_dim() != self.u2_dim {
            return Err(StructureError::DimensionMismatch {
                expected: self.u2_dim,
                got: d_ports.flow_dim(),
            });
        }
        if !d_ports.is_dirac() {
            return Err(StructureError::NotDirac {
                found: d_ports.class().as_str(),
            });
        }
        let closed_kind = if self.kind.is_forward() {
            IoKind::Fio
        } else {
            IoKind::Bio
        };
        IoStructure::new(
            closed_kind,
            self.d_u1.clone(),
            d_ports.clone(),
            self.coupling.clone(),
        )
    }

    /// The port-bearing Dirac structure on U1 ⊕ U2 associated with a forward
    /// record: {(X, f, α, e) : (X − g f, α) ∈ D_{U1}, e + gᵀ α = 0}. The sign
    /// of e matches the convention that incoming power is counted
    /// positively in the dynamics pairing.
    pub fn ph_structure(&self) -> Result<LinearStructure, StructureError> {
        if !self.kind.is_forward() {
            return Err(StructureError::NotOpen);
        }
        let n1 = self.u1_dim;
        let n2 = self.u2_dim;
        let total = n1 + n2;
        let g = &self.coupling.mat;
        // Unknowns z = (X, f, α, e).
        let mut lift = DMatrix::<f64>::zeros(2 * n1, 2 * total);
        lift.view_mut((0, 0), (n1, n1))
            .copy_from(&DMatrix::identity(n1, n1));
        lift.view_mut((0, n1), (n1, n2)).copy_from(&(-g));
        lift.view_mut((n1, total), (n1, n1))
            .copy_from(&DMatrix::identity(n1, n1));
        let res_d1 =
            DMatrix::<f64>::identity(2 * n1, 2 * n1) - self.d_u1.span().projector();
        let state_rows = res_d1 * lift;
        let mut effort_rows = DMatrix::<f64>::zeros(n2, 2 * total);
        effort_rows
            .view_mut((0, total), (n2, n1))
            .copy_from(&g.transpose());
        effort_rows
            .view_mut((0, total + n1), (n2, n2))
            .copy_from(&DMatrix::identity(n2, n2));
        let span = null_space(&vstack(&[&state_rows, &effort_rows]));
        LinearStructure::from_span(span)
    }
}

/// A port flow/effort pair certifying membership in an effective structure,
/// with the residuals of the three defining conditions.
#[derive(Debug, Clone)]
pub struct PortWitness {
    pub u2: DVector<f64>,
    pub alpha2: DVector<f64>,
    pub residuals: [f64; 3],
}

#[derive(Deserialize)]
struct IoStructureJson {
    kind: IoKind,
    u1_dim: usize,
    u2_dim: usize,
    d_u1: LinearStructure,
    port_struct: LinearStructure,
    coupling: LinearMapSpec,
}

impl<'de> Deserialize<'de> for IoStructure {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = IoStructureJson::deserialize(deserializer)?;
        let built = IoStructure::new(raw.kind, raw.d_u1, raw.port_struct, raw.coupling)
            .map_err(serde::de::Error::custom)?;
        if built.u1_dim != raw.u1_dim || built.u2_dim != raw.u2_dim {
            return Err(serde::de::Error::custom(format!(
                "declared dims ({}, {}) disagree with structures ({}, {})",
                raw.u1_dim, raw.u2_dim, built.u1_dim, built.u2_dim
            )));
        }
        Ok(built)
    }
}
