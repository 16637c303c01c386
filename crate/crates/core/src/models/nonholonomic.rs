//! Nonholonomic systems on (q, p): Hamiltonian dynamics constrained by
//! velocity-level one-forms μ^a(q), realized as a forward input-output
//! structure whose ports inject the reaction forces λ_a μ^a into the
//! momentum equations while the zero-effort port structure enforces
//! μ^a_i ∂H/∂p_i = 0. The multipliers are reported through the port trace.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::ModelError;
use crate::dirac::{LinearStructure, TwoForm};
use crate::dynamics::{KernelRep, StateField};
use crate::iostruct::{IoKind, IoStructure};
use crate::linalg::min_norm_solve;
use crate::policy::policy;
use crate::subspace::Subspace;
use crate::transfer::LinearMapSpec;

type ScalarFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type ConstraintFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// Configuration dimension, Hamiltonian callbacks on the full (q, p) state,
/// and the constraint coefficient matrix μ(q) (one row per constraint).
pub struct NonholonomicSpec {
    pub config_dim: usize,
    pub hamiltonian: Box<ScalarFn>,
    pub gradient: Box<VectorFn>,
    pub mu_at: Box<ConstraintFn>,
}

pub struct NonholonomicSystem {
    spec: Arc<NonholonomicSpec>,
    constraint_count: usize,
    pub field: StateField,
}

impl NonholonomicSystem {
    /// The forward record at a state: canonical symplectic structure on
    /// (q, p), zero-effort ports, and the multiplier injection map
    /// λ ↦ (0, μᵀ λ).
    pub fn io_at(&self, x: &DVector<f64>) -> Result<IoStructure, ModelError> {
        let nq = self.spec.config_dim;
        let q = x.rows(0, nq).into_owned();
        let mu = (self.spec.mu_at)(&q);
        let d1 = LinearStructure::graph_of_form(&TwoForm::canonical_symplectic(nq))?;
        let ports =
            LinearStructure::from_flow_space(&Subspace::full(self.constraint_count))?;
        let mut g = DMatrix::<f64>::zeros(2 * nq, self.constraint_count);
        g.view_mut((nq, 0), (nq, self.constraint_count))
            .copy_from(&mu.transpose());
        Ok(IoStructure::new(IoKind::Fio, d1, ports, LinearMapSpec::new(g))?)
    }

    /// Constraint residual μ(q) ∂H/∂p at a state.
    pub fn constraint_residual(&self, x: &DVector<f64>) -> f64 {
        let nq = self.spec.config_dim;
        let q = x.rows(0, nq).into_owned();
        let mu = (self.spec.mu_at)(&q);
        let dh = (self.spec.gradient)(x);
        (mu * dh.rows(nq, nq)).amax()
    }
}

/// Kernel rows of the effective structure at a state:
/// v_q = α_p, v_p + α_q ∈ span(μᵀ), μ α_p = 0.
fn nonholonomic_kernel(nq: usize, mu: &DMatrix<f64>) -> KernelRep {
    let k = mu.nrows();
    let n = 2 * nq;
    let forces = Subspace::canonicalize(&mu.transpose());
    let away = forces.complement().basis().transpose().into_owned();
    let rows = nq + away.nrows() + k;
    let mut flow = DMatrix::<f64>::zeros(rows, n);
    let mut effort = DMatrix::<f64>::zeros(rows, n);
    // v_q − α_p = 0.
    flow.view_mut((0, 0), (nq, nq))
        .copy_from(&DMatrix::identity(nq, nq));
    effort
        .view_mut((0, nq), (nq, nq))
        .copy_from(&(-DMatrix::<f64>::identity(nq, nq)));
    // Cᵀ (v_p + α_q) = 0 for C spanning the complement of the force range.
    let a = nq;
    flow.view_mut((a, nq), (away.nrows(), nq)).copy_from(&away);
    effort.view_mut((a, 0), (away.nrows(), nq)).copy_from(&away);
    // μ α_p = 0.
    let a = nq + away.nrows();
    effort.view_mut((a, nq), (k, nq)).copy_from(mu);
    KernelRep::new(flow, effort)
}

pub fn build_nonholonomic(spec: Arc<NonholonomicSpec>) -> Result<NonholonomicSystem, ModelError> {
    let nq = spec.config_dim;
    let probe = DVector::zeros(nq);
    let constraint_count = (spec.mu_at)(&probe).nrows();

    let s = Arc::clone(&spec);
    let structure_at = Box::new(move |x: &DVector<f64>| {
        let q = x.rows(0, nq).into_owned();
        nonholonomic_kernel(nq, &(s.mu_at)(&q))
    });
    let s = Arc::clone(&spec);
    let energy = Box::new(move |x: &DVector<f64>| (s.hamiltonian)(x));
    let s = Arc::clone(&spec);
    let gradient = Box::new(move |x: &DVector<f64>| (s.gradient)(x));
    let s = Arc::clone(&spec);
    // Multipliers from the momentum equations: μᵀ λ = v_p + ∂H/∂q; the port
    // effort μ ∂H/∂p is the constraint residual.
    let port = Box::new(move |x: &DVector<f64>, v: &DVector<f64>| {
        let q = x.rows(0, nq).into_owned();
        let mu = (s.mu_at)(&q);
        let dh = (s.gradient)(x);
        let lambda = min_norm_solve(
            &mu.transpose(),
            &(v.rows(nq, nq) + dh.rows(0, nq)),
            policy().rank_rel_tol,
        );
        let residual = mu * dh.rows(nq, nq);
        (lambda, residual)
    });

    Ok(NonholonomicSystem {
        spec,
        constraint_count,
        field: StateField {
            n: 2 * nq,
            structure_at,
            energy,
            gradient,
            port_extractor: Some(port),
        },
    })
}

/// The free particle in R³ with unit mass constrained by ż = y ẋ
/// (coefficients μ = (−y, 0, 1)): the standard nonholonomic test system.
pub fn nonholonomic_particle() -> NonholonomicSpec {
    NonholonomicSpec {
        config_dim: 3,
        hamiltonian: Box::new(|x| 0.5 * (x[3] * x[3] + x[4] * x[4] + x[5] * x[5])),
        gradient: Box::new(|x| {
            DVector::from_column_slice(&[0.0, 0.0, 0.0, x[3], x[4], x[5]])
        }),
        mu_at: Box::new(|q| DMatrix::from_row_slice(1, 3, &[-q[1], 0.0, 1.0])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::StructureClass;
    use crate::dynamics::{simulate, Scheme};
    use approx::assert_abs_diff_eq;

    #[test]
    fn empty_constraint_set_gives_hamilton_equations() {
        let spec = Arc::new(NonholonomicSpec {
            config_dim: 1,
            hamiltonian: Box::new(|x| 0.5 * (x[0] * x[0] + x[1] * x[1])),
            gradient: Box::new(|x| x.clone()),
            mu_at: Box::new(|_| DMatrix::zeros(0, 1)),
        });
        let sys = build_nonholonomic(spec).unwrap();
        let x0 = DVector::from_column_slice(&[1.0, 0.0]);
        let traj = simulate(&sys.field, &x0, 1e-3, 1.0, Scheme::Midpoint).unwrap();
        assert_abs_diff_eq!(traj.final_state()[0], 1.0f64.cos(), epsilon = 1e-6);
        assert_abs_diff_eq!(traj.final_state()[1], -1.0f64.sin(), epsilon = 1e-6);
    }

    #[test]
    fn kernel_matches_effective_structure_at_sample_states() {
        let sys = build_nonholonomic(Arc::new(nonholonomic_particle())).unwrap();
        for q1 in [0.0, 0.4, -1.3] {
            let x = DVector::from_column_slice(&[0.2, q1, 0.1, 0.3, 0.1, q1 * 0.3]);
            let rep = (sys.field.structure_at)(&x);
            assert!(rep.is_dirac_valid());
            let eff = sys.io_at(&x).unwrap().effective_structure().unwrap();
            assert_eq!(eff.class(), StructureClass::Dirac);
            assert!(rep
                .as_structure()
                .unwrap()
                .span()
                .equals(eff.span())
                .unwrap());
        }
    }

    #[test]
    fn particle_respects_constraint_and_energy() {
        let sys = build_nonholonomic(Arc::new(nonholonomic_particle())).unwrap();
        // p_z = y p_x at the start: y = 0, p = (0.3, 0.1, 0).
        let x0 = DVector::from_column_slice(&[0.0, 0.0, 0.0, 0.3, 0.1, 0.0]);
        let traj = simulate(&sys.field, &x0, 1e-3, 2.0, Scheme::Midpoint).unwrap();
        for s in &traj.states {
            let c = s[5] - s[1] * s[3];
            assert!(c.abs() <= 1e-8, "constraint residual {c}");
        }
        assert!(traj.max_energy_drift() <= 1e-10);
        // The multiplier matches the index-reduction value
        // λ = p_x p_y / (1 + y²).
        let k = traj.len() / 2;
        let stage = (&traj.states[k - 1] + &traj.states[k]) / 2.0;
        let expected = stage[3] * stage[4] / (1.0 + stage[1] * stage[1]);
        let (lambda, _) = &traj.port_trace.as_ref().unwrap()[k];
        assert_abs_diff_eq!(lambda[0], expected, epsilon = 1e-6);
    }

    #[test]
    fn inconsistent_initial_momentum_is_rejected() {
        let sys = build_nonholonomic(Arc::new(nonholonomic_particle())).unwrap();
        // y = 1 needs p_z = p_x; violate it.
        let x0 = DVector::from_column_slice(&[0.0, 1.0, 0.0, 0.3, 0.0, 0.0]);
        assert!(simulate(&sys.field, &x0, 1e-3, 1.0, Scheme::Midpoint).is_err());
    }
}
