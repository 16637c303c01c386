//! Port-controlled generalized Hamiltonian systems
//!   ẋ = J(x) ∂E/∂x + g(x) f,   e = gᵀ(x) ∂E/∂x,
//! as forward input-output structures: open with free ports (a system with
//! control inputs), or closed by the zero-effort port structure (the
//! constrained DAE with the former inputs acting as multipliers).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::ModelError;
use crate::dirac::{Bivector, LinearStructure};
use crate::dynamics::{KernelRep, StateField};
use crate::iostruct::{IoKind, IoStructure};
use crate::linalg::min_norm_solve;
use crate::policy::policy;
use crate::subspace::Subspace;
use crate::transfer::LinearMapSpec;

type MatrixFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;
type ScalarFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// Prescribed input signal t ↦ f(t) ∈ R^m for driven simulations.
pub type InputSignal = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// State dimension, port dimension, structure and energy callbacks.
pub struct PortControlledSpec {
    pub n: usize,
    pub m: usize,
    pub j_at: Box<MatrixFn>,
    pub g_at: Box<MatrixFn>,
    pub energy: Box<ScalarFn>,
    pub gradient: Box<VectorFn>,
}

/// Open mode carries the prescribed input making the dynamics well posed;
/// closed mode interconnects the ports with the zero-effort structure.
pub enum PortMode {
    Open(InputSignal),
    Closed,
}

/// A built port-controlled system: the structure family (one input-output
/// record per state) plus a simulable field.
///
/// In open mode the field lives on the extended state (x, τ, p_τ): τ is the
/// simulation clock driving the input and p_τ a bookkeeping momentum
/// absorbing the port power, so the extended structure stays Dirac at every
/// state. The reported energy is the physical E(x); the gradient drives the
/// extended system (its clock components are intentionally not derivatives
/// of the reported energy).
pub struct PortControlledSystem {
    spec: Arc<PortControlledSpec>,
    mode_is_open: bool,
    pub field: StateField,
}

impl PortControlledSystem {
    /// The input-output record at a state: OFIO with the graph of J(x) in
    /// open mode, FIO with zero-effort ports in closed mode.
    pub fn io_at(&self, x: &DVector<f64>) -> Result<IoStructure, ModelError> {
        let spec = &self.spec;
        let j = (spec.j_at)(x);
        let skew_defect = (&j + j.transpose()).amax();
        if skew_defect > 1e-10 {
            return Err(ModelError::NonSkewStructure(skew_defect));
        }
        let d_u1 = LinearStructure::graph_of_bivector(&Bivector::new(j).map_err(|_| {
            ModelError::NonSkewStructure(skew_defect)
        })?)?;
        let g = LinearMapSpec::new((spec.g_at)(x));
        if self.mode_is_open {
            Ok(IoStructure::open_forward(d_u1, spec.m, g)?)
        } else {
            let zero_effort = LinearStructure::from_flow_space(&Subspace::full(spec.m))?;
            Ok(IoStructure::new(IoKind::Fio, d_u1, zero_effort, g)?)
        }
    }

    /// Physical state dimension n (the open-mode field appends two clock
    /// coordinates).
    pub fn state_dim(&self) -> usize {
        self.spec.n
    }

    /// Embeds a physical state into the field's state space (identity for
    /// closed mode; appends τ = 0, p_τ = 0 in open mode).
    pub fn initial_state(&self, x0: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x0.len(), self.spec.n);
        if self.mode_is_open {
            let mut z = DVector::zeros(self.spec.n + 2);
            z.rows_mut(0, self.spec.n).copy_from(x0);
            z
        } else {
            x0.clone()
        }
    }
}

/// Kernel rows of the closed effective structure at a state:
/// {(v, α) : ∃λ with v = J α + g λ, gᵀ α = 0}.
fn closed_kernel(j: &DMatrix<f64>, g: &DMatrix<f64>) -> KernelRep {
    let n = j.nrows();
    let im_g = Subspace::canonicalize(g);
    let away = im_g.complement();
    let ct = away.basis().transpose().into_owned();
    let bt = im_g.basis().transpose().into_owned();
    let rows_away = ct.nrows();
    let rows_port = bt.nrows();
    let mut flow = DMatrix::<f64>::zeros(rows_away + rows_port, n);
    let mut effort = DMatrix::<f64>::zeros(rows_away + rows_port, n);
    flow.view_mut((0, 0), (rows_away, n)).copy_from(&ct);
    effort
        .view_mut((0, 0), (rows_away, n))
        .copy_from(&(-(&ct * j)));
    effort.view_mut((rows_away, 0), (rows_port, n)).copy_from(&bt);
    KernelRep::new(flow, effort)
}

/// Builds the system; see [`PortControlledSystem`] for the state-space
/// conventions of each mode.
pub fn build_port_controlled(
    spec: Arc<PortControlledSpec>,
    mode: PortMode,
) -> Result<PortControlledSystem, ModelError> {
    let n = spec.n;
    let probe = DVector::zeros(n);
    let j_probe = (spec.j_at)(&probe);
    let defect = (&j_probe + j_probe.transpose()).amax();
    if defect > 1e-10 {
        return Err(ModelError::NonSkewStructure(defect));
    }

    let field = match &mode {
        PortMode::Closed => {
            let s = Arc::clone(&spec);
            let structure_at = Box::new(move |x: &DVector<f64>| {
                closed_kernel(&(s.j_at)(x), &(s.g_at)(x))
            });
            let s = Arc::clone(&spec);
            let energy = Box::new(move |x: &DVector<f64>| (s.energy)(x));
            let s = Arc::clone(&spec);
            let gradient = Box::new(move |x: &DVector<f64>| (s.gradient)(x));
            let s = Arc::clone(&spec);
            // Multiplier trace: λ solves g λ = ẋ − J dE; the port effort
            // gᵀ dE vanishes on the constraint set.
            let port = Box::new(move |x: &DVector<f64>, v: &DVector<f64>| {
                let g = (s.g_at)(x);
                let de = (s.gradient)(x);
                let lambda = min_norm_solve(&g, &(v - (s.j_at)(x) * &de), policy().rank_rel_tol);
                (lambda, g.transpose() * de)
            });
            StateField {
                n,
                structure_at,
                energy,
                gradient,
                port_extractor: Some(port),
            }
        }
        PortMode::Open(input) => {
            let s = Arc::clone(&spec);
            let inp = Arc::clone(input);
            // Extended state z = (x, τ, p_τ): the structure is the graph of
            //   [ J       0   g f(τ) ]
            //   [ 0       0   1      ]
            //   [ -(gf)ᵀ  -1  0      ]
            // which is skew, hence Dirac, at every state.
            let structure_at = Box::new(move |z: &DVector<f64>| {
                let x = z.rows(0, n).into_owned();
                let tau = z[n];
                let j = (s.j_at)(&x);
                let gf = (s.g_at)(&x) * inp(tau);
                let mut jext = DMatrix::<f64>::zeros(n + 2, n + 2);
                jext.view_mut((0, 0), (n, n)).copy_from(&j);
                jext.view_mut((0, n + 1), (n, 1)).copy_from(&gf);
                jext[(n, n + 1)] = 1.0;
                jext.view_mut((n + 1, 0), (1, n))
                    .copy_from(&(-gf.transpose()));
                jext[(n + 1, n)] = -1.0;
                KernelRep::new(DMatrix::identity(n + 2, n + 2), -jext)
            });
            let s = Arc::clone(&spec);
            let energy = Box::new(move |z: &DVector<f64>| (s.energy)(&z.rows(0, n).into_owned()));
            let s = Arc::clone(&spec);
            let gradient = Box::new(move |z: &DVector<f64>| {
                let x = z.rows(0, n).into_owned();
                let de = (s.gradient)(&x);
                let mut out = DVector::zeros(n + 2);
                out.rows_mut(0, n).copy_from(&de);
                out[n + 1] = 1.0;
                out
            });
            let s = Arc::clone(&spec);
            let inp = Arc::clone(input);
            let port = Box::new(move |z: &DVector<f64>, _v: &DVector<f64>| {
                let x = z.rows(0, n).into_owned();
                let tau = z[n];
                let e = (s.g_at)(&x).transpose() * (s.gradient)(&x);
                (inp(tau), e)
            });
            StateField {
                n: n + 2,
                structure_at,
                energy,
                gradient,
                port_extractor: Some(port),
            }
        }
    };

    Ok(PortControlledSystem {
        spec,
        mode_is_open: matches!(mode, PortMode::Open(_)),
        field,
    })
}

/// A constant-coefficient spec: J and g fixed matrices, quadratic energy
/// E = ½ xᵀ Q x with Q symmetric positive semidefinite.
pub fn constant_spec(j: DMatrix<f64>, g: DMatrix<f64>, q: DMatrix<f64>) -> PortControlledSpec {
    let n = j.nrows();
    let m = g.ncols();
    assert_eq!(g.nrows(), n);
    assert_eq!(q.nrows(), n);
    let q2 = q.clone();
    PortControlledSpec {
        n,
        m,
        j_at: Box::new(move |_| j.clone()),
        g_at: Box::new(move |_| g.clone()),
        energy: Box::new(move |x| 0.5 * (x.transpose() * &q * x)[(0, 0)]),
        gradient: Box::new(move |x| &q2 * x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::StructureClass;
    use crate::dynamics::{power_balance, simulate, Scheme};
    use approx::assert_abs_diff_eq;

    fn canonical_j(n2: usize) -> DMatrix<f64> {
        let half = n2 / 2;
        let mut j = DMatrix::zeros(n2, n2);
        for i in 0..half {
            j[(i, half + i)] = 1.0;
            j[(half + i, i)] = -1.0;
        }
        j
    }

    #[test]
    fn zero_coupling_is_plain_hamiltonian_flow() {
        let spec = Arc::new(constant_spec(
            canonical_j(2),
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
        ));
        let sys = build_port_controlled(spec, PortMode::Closed).unwrap();
        let x0 = DVector::from_column_slice(&[1.0, 0.0]);
        let traj = simulate(&sys.field, &x0, 1e-3, 1.0, Scheme::Midpoint).unwrap();
        // ẋ = J x: q = cos t, p = −sin t.
        assert_abs_diff_eq!(traj.final_state()[0], 1.0f64.cos(), epsilon = 1e-6);
        assert_abs_diff_eq!(traj.final_state()[1], -1.0f64.sin(), epsilon = 1e-6);
    }

    #[test]
    fn closed_kernel_matches_effective_structure() {
        let spec = Arc::new(constant_spec(
            canonical_j(4),
            DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 1.0, 0.0]),
            DMatrix::identity(4, 4),
        ));
        let sys = build_port_controlled(Arc::clone(&spec), PortMode::Closed).unwrap();
        let x = DVector::from_column_slice(&[0.3, -0.2, 0.0, 0.7]);
        let io = sys.io_at(&x).unwrap();
        let eff = io.effective_structure().unwrap();
        assert_eq!(eff.class(), StructureClass::Dirac);
        let rep = (sys.field.structure_at)(&x);
        assert!(rep
            .as_structure()
            .unwrap()
            .span()
            .equals(eff.span())
            .unwrap());
    }

    #[test]
    fn closed_mode_conserves_energy_and_enforces_constraint() {
        // Representation-II DAE: constraint gᵀ dE = x₃ = 0, multiplier
        // λ = q₁ keeps it invariant while (q₂, p₂) oscillates.
        let spec = Arc::new(constant_spec(
            canonical_j(4),
            DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 1.0, 0.0]),
            DMatrix::identity(4, 4),
        ));
        let sys = build_port_controlled(spec, PortMode::Closed).unwrap();
        let x0 = DVector::from_column_slice(&[0.4, 1.0, 0.0, 0.0]);
        let traj = simulate(&sys.field, &x0, 1e-2, 10.0, Scheme::Midpoint).unwrap();
        assert!(traj.max_energy_drift() <= 1e-9);
        for s in &traj.states {
            assert!(s[2].abs() <= 1e-9, "constraint violated: {}", s[2]);
        }
        // Frozen q₁ and an active multiplier λ = q₁.
        assert_abs_diff_eq!(traj.final_state()[0], 0.4, epsilon = 1e-9);
        let ports = traj.port_trace.as_ref().unwrap();
        let (lambda, effort) = &ports[ports.len() / 2];
        assert_abs_diff_eq!(lambda[0], 0.4, epsilon = 1e-6);
        assert!(effort.amax() <= 1e-9);
    }

    #[test]
    fn open_mode_power_balance_matches_input() {
        let spec = Arc::new(constant_spec(
            canonical_j(2),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::identity(2, 2),
        ));
        let input: InputSignal = Arc::new(|t: f64| DVector::from_column_slice(&[t.sin()]));
        let sys = build_port_controlled(spec, PortMode::Open(input)).unwrap();
        let z0 = sys.initial_state(&DVector::from_column_slice(&[1.0, 0.0]));
        let traj = simulate(&sys.field, &z0, 1e-2, 5.0, Scheme::Midpoint).unwrap();
        let report = power_balance(&traj);
        assert!(report.has_ports);
        assert!(
            report.max_residual <= 1e-6,
            "power residual {}",
            report.max_residual
        );
        // The drive genuinely pumps energy, so the balance is not vacuous.
        assert!(report.max_energy_drift > 1e-3);
        // Clock coordinate tracks time.
        assert_abs_diff_eq!(traj.final_state()[2], 5.0, epsilon = 1e-9);
    }

    #[test]
    fn open_io_structure_is_coisotropic_family() {
        let spec = Arc::new(constant_spec(
            canonical_j(2),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::identity(2, 2),
        ));
        let input: InputSignal = Arc::new(|_| DVector::from_column_slice(&[0.0]));
        let sys = build_port_controlled(spec, PortMode::Open(input)).unwrap();
        let io = sys.io_at(&DVector::from_column_slice(&[0.5, 0.5])).unwrap();
        assert_eq!(io.kind(), IoKind::Ofio);
        let sigma = io.effective_structure().unwrap();
        assert_eq!(sigma.class(), StructureClass::Coisotropic);
    }

    #[test]
    fn non_skew_structure_matrix_is_rejected() {
        let mut j = canonical_j(2);
        j[(0, 0)] = 0.5;
        let spec = Arc::new(constant_spec(
            j,
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
        ));
        assert!(matches!(
            build_port_controlled(spec, PortMode::Closed),
            Err(ModelError::NonSkewStructure(_))
        ));
    }
}
