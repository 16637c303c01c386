//! A pendulum of mass M (unit massless rod) and a free particle of mass m in
//! the plane, both in a gravitational field, with velocity ports
//! (θ̇ cos θ, −θ̇ sin θ, ẋ, ẏ). Closing the ports with the pairing
//! f1 = f3, f2 = f4, e1 = −e3, e2 = −e4 locks the particle onto a pendulum
//! motion in phase with the rod: x(t) − sin θ(t) and y(t) − cos θ(t) are
//! first integrals.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::ModelError;
use crate::dirac::{LinearStructure, TwoForm};
use crate::dynamics::{KernelRep, StateField};
use crate::iostruct::IoStructure;
use crate::subspace::Subspace;
use crate::transfer::LinearMapSpec;

/// Masses, gravity and the initial condition (angles in radians; momenta in
/// the canonical chart on (θ, x, y)).
#[derive(Debug, Clone, Copy)]
pub struct PendulumPairSpec {
    pub pendulum_mass: f64,
    pub particle_mass: f64,
    pub gravity: f64,
    pub theta0: f64,
    pub x0: f64,
    pub y0: f64,
    pub p_theta0: f64,
    pub p_x0: f64,
    pub p_y0: f64,
}

impl PendulumPairSpec {
    /// Initial data with the particle placed on the rod tip and momenta
    /// consistent with a common angular velocity θ̇₀ — the configuration in
    /// which the two masses move as a single pendulum.
    pub fn matched(
        pendulum_mass: f64,
        particle_mass: f64,
        gravity: f64,
        theta0: f64,
        theta_dot0: f64,
    ) -> PendulumPairSpec {
        let mut spec = PendulumPairSpec {
            pendulum_mass,
            particle_mass,
            gravity,
            theta0,
            x0: theta0.sin(),
            y0: theta0.cos(),
            p_theta0: 0.0,
            p_x0: 0.0,
            p_y0: 0.0,
        };
        spec.set_consistent_momenta(theta_dot0);
        spec
    }

    /// Momenta compatible with the closed-port velocity constraints for a
    /// given angular velocity: p_θ = M θ̇, p_x = m θ̇ cos θ, p_y = −m θ̇ sin θ.
    pub fn set_consistent_momenta(&mut self, theta_dot0: f64) {
        self.p_theta0 = self.pendulum_mass * theta_dot0;
        self.p_x0 = self.particle_mass * theta_dot0 * self.theta0.cos();
        self.p_y0 = -self.particle_mass * theta_dot0 * self.theta0.sin();
    }

    pub fn initial_state(&self) -> DVector<f64> {
        DVector::from_column_slice(&[
            self.theta0,
            self.x0,
            self.y0,
            self.p_theta0,
            self.p_x0,
            self.p_y0,
        ])
    }

    /// The phase-lock constants (x₀ − sin θ₀, y₀ − cos θ₀); both vanish for
    /// matched initial data.
    pub fn phase_constants(&self) -> (f64, f64) {
        (self.x0 - self.theta0.sin(), self.y0 - self.theta0.cos())
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.pendulum_mass <= 0.0 {
            return Err(ModelError::NonPositiveParameter("pendulum mass"));
        }
        if self.particle_mass <= 0.0 {
            return Err(ModelError::NonPositiveParameter("particle mass"));
        }
        if self.gravity <= 0.0 {
            return Err(ModelError::NonPositiveParameter("gravity"));
        }
        Ok(())
    }
}

/// State layout: (θ, x, y, p_θ, p_x, p_y).
pub struct PendulumPairSystem {
    pub spec: PendulumPairSpec,
    pub closed: bool,
    /// Simulable only for the closed system; the open record has
    /// underdetermined dynamics.
    pub field: Option<StateField>,
}

impl PendulumPairSystem {
    /// The backward record at a state: OBIO open, BIO with the closing
    /// Dirac structure when closed.
    pub fn io_at(&self, state: &DVector<f64>) -> Result<IoStructure, ModelError> {
        let d1 = LinearStructure::graph_of_form(&TwoForm::canonical_symplectic(3))?;
        let p_map = LinearMapSpec::new(port_map(state[0]));
        let open = IoStructure::open_backward(d1, 4, p_map)?;
        if self.closed {
            Ok(open.interconnect(&closure_structure())?)
        } else {
            Ok(open)
        }
    }

    pub fn hamiltonian(&self, x: &DVector<f64>) -> f64 {
        hamiltonian(&self.spec, x)
    }

    /// Residual of the momenta relation
    /// ṗ_θ + (M + m) g sin θ + ṗ_x cos θ − ṗ_y sin θ = 0 for a state and
    /// velocity (the combined covector row of the closed structure).
    pub fn momenta_relation_residual(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let spec = &self.spec;
        let theta = x[0];
        v[3] + (spec.pendulum_mass + spec.particle_mass) * spec.gravity * theta.sin()
            + v[4] * theta.cos()
            - v[5] * theta.sin()
    }
}

fn hamiltonian(spec: &PendulumPairSpec, x: &DVector<f64>) -> f64 {
    let (theta, y) = (x[0], x[2]);
    let (pt, px, py) = (x[3], x[4], x[5]);
    pt * pt / (2.0 * spec.pendulum_mass)
        + (px * px + py * py) / (2.0 * spec.particle_mass)
        - spec.pendulum_mass * spec.gravity * theta.cos()
        - spec.particle_mass * spec.gravity * y
}

fn grad_hamiltonian(spec: &PendulumPairSpec, x: &DVector<f64>) -> DVector<f64> {
    let theta = x[0];
    DVector::from_column_slice(&[
        spec.pendulum_mass * spec.gravity * theta.sin(),
        0.0,
        -spec.particle_mass * spec.gravity,
        x[3] / spec.pendulum_mass,
        x[4] / spec.particle_mass,
        x[5] / spec.particle_mass,
    ])
}

/// Velocity port map at angle θ: rows are the port flows
/// (θ̇ cos θ, −θ̇ sin θ, ẋ, ẏ) over (θ̇, ẋ, ẏ, ṗ_θ, ṗ_x, ṗ_y).
fn port_map(theta: f64) -> DMatrix<f64> {
    let mut p = DMatrix::<f64>::zeros(4, 6);
    p[(0, 0)] = theta.cos();
    p[(1, 0)] = -theta.sin();
    p[(2, 1)] = 1.0;
    p[(3, 2)] = 1.0;
    p
}

/// The closing Dirac structure: f1 = f3, f2 = f4, e1 = −e3, e2 = −e4.
pub fn closure_structure() -> LinearStructure {
    let mut basis = DMatrix::<f64>::zeros(8, 4);
    basis[(0, 0)] = 1.0;
    basis[(2, 0)] = 1.0;
    basis[(1, 1)] = 1.0;
    basis[(3, 1)] = 1.0;
    basis[(4, 2)] = 1.0;
    basis[(6, 2)] = -1.0;
    basis[(5, 3)] = 1.0;
    basis[(7, 3)] = -1.0;
    LinearStructure::from_span(Subspace::canonicalize(&basis))
        .expect("closure structure is Dirac by construction")
}

/// Kernel rows of the closed effective structure at angle θ: the canonical
/// momentum rows, one combined covector row, and two velocity-lock rows.
fn closed_kernel(theta: f64) -> KernelRep {
    // Effort directions injected by the closed ports span
    // w1 = (cos θ, −1, 0), w2 = (−sin θ, 0, −1) in the configuration slots;
    // c = w1 × w2 is the direction they leave unconstrained.
    let c = {
        let mut c = DVector::<f64>::zeros(3);
        c[0] = 1.0;
        c[1] = theta.cos();
        c[2] = -theta.sin();
        c / (2.0f64).sqrt()
    };
    let mut flow = DMatrix::<f64>::zeros(6, 6);
    let mut effort = DMatrix::<f64>::zeros(6, 6);
    // α_p − v_q = 0 (three rows).
    for i in 0..3 {
        flow[(i, i)] = -1.0;
        effort[(i, 3 + i)] = 1.0;
    }
    // cᵀ (α_q + v_p) = 0.
    for i in 0..3 {
        flow[(3, 3 + i)] = c[i];
        effort[(3, i)] = c[i];
    }
    // Velocity locks: v_θ cos θ − v_x = 0, −v_θ sin θ − v_y = 0.
    flow[(4, 0)] = theta.cos();
    flow[(4, 1)] = -1.0;
    flow[(5, 0)] = -theta.sin();
    flow[(5, 2)] = -1.0;
    KernelRep::new(flow, effort)
}

pub fn build_pendulum_pair(
    spec: PendulumPairSpec,
    closed: bool,
) -> Result<PendulumPairSystem, ModelError> {
    spec.validate()?;
    let field = if closed {
        let s = Arc::new(spec);
        let sg = Arc::clone(&s);
        let se = Arc::clone(&s);
        let sp = Arc::clone(&s);
        let port = Box::new(move |x: &DVector<f64>, v: &DVector<f64>| {
            // Ports from the velocity map; efforts reconstructed from the
            // momentum equations: p*(e) = dH − ω♭(v) with
            // ω♭(v) = (−v_p, v_q), so the configuration residual determines
            // (e1, e2) and the closure gives (e3, e4) = (−e1, −e2).
            let theta = x[0];
            let u2 = port_map(theta) * v;
            let dh = grad_hamiltonian(&sp, x);
            let rq = DVector::from_column_slice(&[
                dh[0] + v[3],
                dh[1] + v[4],
                dh[2] + v[5],
            ]);
            // rq = e1 (cos θ, −1, 0) + e2 (−sin θ, 0, −1).
            let e1 = -rq[1];
            let e2 = -rq[2];
            let alpha2 = DVector::from_column_slice(&[e1, e2, -e1, -e2]);
            (u2, alpha2)
        });
        Some(StateField {
            n: 6,
            structure_at: Box::new(move |x: &DVector<f64>| closed_kernel(x[0])),
            energy: Box::new(move |x| hamiltonian(&se, x)),
            gradient: Box::new(move |x| grad_hamiltonian(&sg, x)),
            port_extractor: Some(port),
        })
    } else {
        None
    };
    Ok(PendulumPairSystem {
        spec,
        closed,
        field,
    })
}
