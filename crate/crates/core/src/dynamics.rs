//! Numerical integration of implicit systems ẋ ⊕ dE(x) ∈ D_x, where the
//! state-dependent structure D_x is handed to the solver in kernel form
//! {(v, α) : flow_mat·v + effort_mat·α = 0}.
//!
//! The default scheme is the implicit midpoint rule with the algebraic rows
//! solved simultaneously (a Newton chain on the stage velocity), which
//! preserves quadratic invariants — in particular the energy of closed
//! systems with quadratic Hamiltonians stays at solver tolerance. The
//! underdetermined directions of the velocity (multipliers) are resolved by
//! minimum-norm selection; multipliers are surfaced through the port trace,
//! never hidden.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dirac::LinearStructure;
use crate::error::StructureError;
use crate::linalg::{least_squares_residual_scaled, min_norm_solve_scaled};
use crate::policy::policy;
use crate::subspace::{hstack, null_space, Subspace};

/// Kernel-form tolerance for the Dirac condition EFᵀ + FEᵀ = 0.
const KERNEL_DIRAC_TOL: f64 = 1e-10;

/// A structure on R^n in kernel form: D = {(v, α) : E v + F α = 0} with
/// independent rows after canonicalization.
#[derive(Debug, Clone)]
pub struct KernelRep {
    n: usize,
    flow_mat: DMatrix<f64>,
    effort_mat: DMatrix<f64>,
}

impl KernelRep {
    /// Builds a kernel representation, re-canonicalizing the rows so they
    /// are orthonormal (and in particular independent).
    pub fn new(flow_mat: DMatrix<f64>, effort_mat: DMatrix<f64>) -> KernelRep {
        assert_eq!(flow_mat.nrows(), effort_mat.nrows(), "row count mismatch");
        assert_eq!(flow_mat.ncols(), effort_mat.ncols(), "state dim mismatch");
        let n = flow_mat.ncols();
        let combined = hstack(&[&flow_mat, &effort_mat]);
        let rows = Subspace::canonicalize(&combined.transpose());
        let canon = rows.basis().transpose().into_owned();
        KernelRep {
            n,
            flow_mat: canon.columns(0, n).into_owned(),
            effort_mat: canon.columns(n, n).into_owned(),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    /// Number of independent constraint rows.
    pub fn rows(&self) -> usize {
        self.flow_mat.nrows()
    }

    pub fn flow_mat(&self) -> &DMatrix<f64> {
        &self.flow_mat
    }

    pub fn effort_mat(&self) -> &DMatrix<f64> {
        &self.effort_mat
    }

    /// The represented subspace of R^{2n}.
    pub fn as_structure(&self) -> Result<LinearStructure, StructureError> {
        let combined = hstack(&[&self.flow_mat, &self.effort_mat]);
        LinearStructure::from_span(null_space(&combined))
    }

    /// Max-norm defect of the kernel-form Dirac condition
    /// E Fᵀ + F Eᵀ = 0 (for square row count m = n this characterizes
    /// Dirac structures).
    pub fn dirac_defect(&self) -> f64 {
        let m = &self.flow_mat * self.effort_mat.transpose()
            + &self.effort_mat * self.flow_mat.transpose();
        m.amax()
    }

    pub fn is_dirac_valid(&self) -> bool {
        self.rows() == self.n && self.dirac_defect() <= KERNEL_DIRAC_TOL
    }

    /// Constraint residual of a flow/effort pair.
    pub fn residual(&self, v: &DVector<f64>, alpha: &DVector<f64>) -> DVector<f64> {
        &self.flow_mat * v + &self.effort_mat * alpha
    }

    /// Rows of the constraint space with no flow component: each returned
    /// row w gives a purely algebraic condition w · α = 0 on the effort
    /// (the hidden constraints of the DAE).
    pub fn algebraic_rows(&self) -> DMatrix<f64> {
        let combined = hstack(&[&self.flow_mat, &self.effort_mat]);
        let row_space = Subspace::canonicalize(&combined.transpose());
        let effort_axis = {
            let mut raw = DMatrix::<f64>::zeros(2 * self.n, self.n);
            raw.view_mut((self.n, 0), (self.n, self.n))
                .copy_from(&DMatrix::identity(self.n, self.n));
            Subspace::canonicalize(&raw)
        };
        match row_space.intersect(&effort_axis) {
            Ok(pure) => pure.basis().rows(self.n, self.n).transpose().into_owned(),
            Err(_) => DMatrix::zeros(0, self.n),
        }
    }
}

/// Kernel representation of a Dirac structure given as a subspace: the rows
/// are an orthonormal basis of the Euclidean orthogonal of the span.
pub fn kernel_rep_of(d: &LinearStructure) -> Result<KernelRep, StructureError> {
    if !d.is_dirac() {
        return Err(StructureError::NotDirac {
            found: d.class().as_str(),
        });
    }
    let n = d.flow_dim();
    let rows = d.span().complement();
    let canon = rows.basis().transpose().into_owned();
    Ok(KernelRep {
        n,
        flow_mat: canon.columns(0, n).into_owned(),
        effort_mat: canon.columns(n, n).into_owned(),
    })
}

type StructureFn = dyn Fn(&DVector<f64>) -> KernelRep + Send + Sync;
type EnergyFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type PortFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> (DVector<f64>, DVector<f64>) + Send + Sync;

/// A state-dependent implicit system: fiberwise structure, energy, its
/// gradient, and an optional extractor reporting port variables (u2, α2) —
/// or multipliers — for a state and velocity.
///
/// `energy` is the reported energy whose rate the ports balance; `gradient`
/// drives the dynamics. They are gradients of the same function for closed
/// systems; driven systems built on an extended state may deliberately
/// exclude exogenous bookkeeping coordinates from `energy`.
pub struct StateField {
    pub n: usize,
    pub structure_at: Box<StructureFn>,
    pub energy: Box<EnergyFn>,
    pub gradient: Box<GradientFn>,
    pub port_extractor: Option<Box<PortFn>>,
}

impl StateField {
    /// Max relative disagreement between `gradient` and central finite
    /// differences of `energy` over the probe states.
    pub fn gradient_check(&self, probes: &[DVector<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for x in probes {
            let g = (self.gradient)(x);
            let mut fd = DVector::zeros(self.n);
            for i in 0..self.n {
                let h = 1e-6 * x[i].abs().max(1.0);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                fd[i] = ((self.energy)(&xp) - (self.energy)(&xm)) / (2.0 * h);
            }
            let scale = g.norm().max(1.0);
            worst = worst.max((g - fd).norm() / scale);
        }
        worst
    }
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Implicit midpoint with simultaneous algebraic solve (default).
    Midpoint,
    /// Classical RK4 on the minimum-norm vector field with post-step
    /// projection onto the hidden algebraic constraints.
    Rk4,
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "midpoint" => Ok(Scheme::Midpoint),
            "rk4" => Ok(Scheme::Rk4),
            other => Err(format!("unknown scheme `{other}` (expected midpoint|rk4)")),
        }
    }
}

/// Solver knobs. The defaults are what the documented tolerances assume.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Stage-residual tolerance for the Newton chain.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Acceptance bound on the consistency residual (distance of the effort
    /// load from the range of the flow matrix).
    pub consistency_tol: f64,
    /// Project inconsistent initial data onto the constraint set instead of
    /// rejecting it.
    pub project_initial: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            newton_tol: 1e-10,
            max_newton_iters: 50,
            consistency_tol: 1e-6,
            project_initial: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("inconsistent DAE state: residual {residual:.3e} exceeds {tol:.3e}")]
    InconsistentState { residual: f64, tol: f64 },

    #[error("structure rank changed between stages: {expected} rows at the base state, {found} at the stage point")]
    RegularityViolation { expected: usize, found: usize },

    #[error("structure is not Dirac in kernel form: {rows} rows on an {n}-dimensional state, defect {defect:.3e}")]
    NonDiracStructure { rows: usize, n: usize, defect: f64 },

    #[error("stage solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<DynamicsError>,
    },

    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Outcome of one accepted step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: DVector<f64>,
    /// Discrete velocity (x_next − x) / dt.
    pub velocity: DVector<f64>,
    /// State at which the structure and gradient were evaluated (the
    /// midpoint stage for both schemes' diagnostics).
    pub stage_state: DVector<f64>,
    /// Distance of the effort load from the range of the flow matrix at the
    /// stage point.
    pub consistency_residual: f64,
    /// Final norm of the stage equations.
    pub stage_residual: f64,
    pub newton_iterations: usize,
}

fn stage_residual_fn(
    field: &StateField,
    x: &DVector<f64>,
    dt: f64,
    v: &DVector<f64>,
    expected_rows: usize,
) -> Result<DVector<f64>, DynamicsError> {
    let x_mid = x + (dt / 2.0) * v;
    let rep = (field.structure_at)(&x_mid);
    if rep.rows() != expected_rows {
        return Err(DynamicsError::RegularityViolation {
            expected: expected_rows,
            found: rep.rows(),
        });
    }
    let g = (field.gradient)(&x_mid);
    Ok(rep.residual(v, &g))
}

/// One step of the Dirac system from `x` with step size `dt`.
pub fn step(
    field: &StateField,
    x: &DVector<f64>,
    dt: f64,
    scheme: Scheme,
    opts: &SolverOptions,
) -> Result<StepResult, DynamicsError> {
    assert!(dt > 0.0, "dt must be positive");
    let rep0 = (field.structure_at)(x);
    if !rep0.is_dirac_valid() {
        return Err(DynamicsError::NonDiracStructure {
            rows: rep0.rows(),
            n: rep0.state_dim(),
            defect: rep0.dirac_defect(),
        });
    }
    let g0 = (field.gradient)(x);
    let base_consistency = least_squares_residual_scaled(
        rep0.flow_mat(),
        &(-(rep0.effort_mat() * &g0)),
        policy().rank_rel_tol,
        1.0,
    );
    if base_consistency > opts.consistency_tol {
        return Err(DynamicsError::InconsistentState {
            residual: base_consistency,
            tol: opts.consistency_tol,
        });
    }
    match scheme {
        Scheme::Midpoint => step_midpoint(field, x, dt, opts, &rep0, &g0),
        Scheme::Rk4 => step_rk4(field, x, dt, opts, &rep0, &g0),
    }
}

fn min_norm_velocity(rep: &KernelRep, g: &DVector<f64>) -> DVector<f64> {
    // Kernel rows are orthonormal, so rank decisions are floored at unit
    // scale: an all-noise flow matrix means "no flow directions", not an
    // ill-scaled solvable system.
    min_norm_solve_scaled(
        rep.flow_mat(),
        &(-(rep.effort_mat() * g)),
        policy().rank_rel_tol,
        1.0,
    )
}

fn step_midpoint(
    field: &StateField,
    x: &DVector<f64>,
    dt: f64,
    opts: &SolverOptions,
    rep0: &KernelRep,
    g0: &DVector<f64>,
) -> Result<StepResult, DynamicsError> {
    let n = field.n;
    let m = rep0.rows();
    let mut v = min_norm_velocity(rep0, g0);
    let mut r = stage_residual_fn(field, x, dt, &v, m)?;
    let mut iterations = 0;
    while r.amax() > opts.newton_tol && iterations < opts.max_newton_iters {
        // Finite-difference Jacobian of the stage equations in v.
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for j in 0..n {
            let h = 1e-6 * v[j].abs().max(1.0);
            let mut vp = v.clone();
            vp[j] += h;
            let rp = stage_residual_fn(field, x, dt, &vp, m)?;
            jac.set_column(j, &((rp - &r) / h));
        }
        let dv = min_norm_solve_scaled(&jac, &(-&r), policy().rank_rel_tol, 1.0);
        v += &dv;
        r = stage_residual_fn(field, x, dt, &v, m)?;
        iterations += 1;
        if dv.amax() <= 1e-16 {
            break;
        }
    }
    if r.amax() > opts.newton_tol {
        return Err(DynamicsError::SolverDiverged {
            residual: r.amax(),
            iterations,
        });
    }
    let stage_state = x + (dt / 2.0) * &v;
    let rep_mid = (field.structure_at)(&stage_state);
    let g_mid = (field.gradient)(&stage_state);
    let consistency_residual = least_squares_residual_scaled(
        rep_mid.flow_mat(),
        &(-(rep_mid.effort_mat() * &g_mid)),
        policy().rank_rel_tol,
        1.0,
    );
    Ok(StepResult {
        state: x + dt * &v,
        velocity: v,
        stage_state,
        consistency_residual,
        stage_residual: r.amax(),
        newton_iterations: iterations,
    })
}

fn rk4_stage_velocity(
    field: &StateField,
    x: &DVector<f64>,
    expected_rows: usize,
    opts: &SolverOptions,
) -> Result<DVector<f64>, DynamicsError> {
    let rep = (field.structure_at)(x);
    if rep.rows() != expected_rows {
        return Err(DynamicsError::RegularityViolation {
            expected: expected_rows,
            found: rep.rows(),
        });
    }
    let g = (field.gradient)(x);
    let residual = least_squares_residual_scaled(
        rep.flow_mat(),
        &(-(rep.effort_mat() * &g)),
        policy().rank_rel_tol,
        1.0,
    );
    if residual > opts.consistency_tol {
        return Err(DynamicsError::InconsistentState {
            residual,
            tol: opts.consistency_tol,
        });
    }
    Ok(min_norm_velocity(&rep, &g))
}

fn step_rk4(
    field: &StateField,
    x: &DVector<f64>,
    dt: f64,
    opts: &SolverOptions,
    rep0: &KernelRep,
    g0: &DVector<f64>,
) -> Result<StepResult, DynamicsError> {
    let m = rep0.rows();
    let k1 = min_norm_velocity(rep0, g0);
    let k2 = rk4_stage_velocity(field, &(x + (dt / 2.0) * &k1), m, opts)?;
    let k3 = rk4_stage_velocity(field, &(x + (dt / 2.0) * &k2), m, opts)?;
    let k4 = rk4_stage_velocity(field, &(x + dt * &k3), m, opts)?;
    let mut x_next = x + (dt / 6.0) * (&k1 + 2.0 * &k2 + 2.0 * &k3 + &k4);

    // Post-step projection onto the hidden algebraic constraints
    // (rows of the structure with no flow component).
    let mut iterations = 0;
    let algebraic = (field.structure_at)(&x_next).algebraic_rows();
    if algebraic.nrows() > 0 {
        let n = field.n;
        let constraint = |y: &DVector<f64>| -> DVector<f64> {
            (field.structure_at)(y).algebraic_rows() * (field.gradient)(y)
        };
        let mut c = constraint(&x_next);
        while c.amax() > opts.newton_tol && iterations < 20 {
            let k = c.len();
            let mut jac = DMatrix::<f64>::zeros(k, n);
            for j in 0..n {
                let h = 1e-6 * x_next[j].abs().max(1.0);
                let mut xp = x_next.clone();
                xp[j] += h;
                jac.set_column(j, &((constraint(&xp) - &c) / h));
            }
            let dx = min_norm_solve_scaled(&jac, &(-&c), policy().rank_rel_tol, 1.0);
            x_next += &dx;
            c = constraint(&x_next);
            iterations += 1;
        }
    }

    let velocity = (&x_next - x) / dt;
    let stage_state = (x + &x_next) / 2.0;
    let rep_mid = (field.structure_at)(&stage_state);
    if rep_mid.rows() != m {
        return Err(DynamicsError::RegularityViolation {
            expected: m,
            found: rep_mid.rows(),
        });
    }
    let g_mid = (field.gradient)(&stage_state);
    let consistency_residual = least_squares_residual_scaled(
        rep_mid.flow_mat(),
        &(-(rep_mid.effort_mat() * &g_mid)),
        policy().rank_rel_tol,
        1.0,
    );
    let stage_residual = rep_mid.residual(&velocity, &g_mid).amax();
    Ok(StepResult {
        state: x_next,
        velocity,
        stage_state,
        consistency_residual,
        stage_residual,
        newton_iterations: iterations,
    })
}

/// Time-stamped simulation output with structure-preservation diagnostics.
/// All per-index vectors have the same length as `times`; index 0 holds the
/// initial state with its consistency residual.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub energies: Vec<f64>,
    pub consistency_residuals: Vec<f64>,
    pub port_trace: Option<Vec<(DVector<f64>, DVector<f64>)>>,
    pub power_residuals: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory is never empty")
    }

    /// Largest |E(t) − E(0)| along the trajectory.
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energies[0];
        self.energies
            .iter()
            .map(|e| (e - e0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_consistency_residual(&self) -> f64 {
        self.consistency_residuals.iter().copied().fold(0.0, f64::max)
    }

    /// CSV with header `t,x0..x{n-1},E,consistency_residual[,power_residual]`
    /// at full double precision.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut header = String::from("t");
        for i in 0..n {
            header.push_str(&format!(",x{i}"));
        }
        header.push_str(",E,consistency_residual");
        if self.power_residuals.is_some() {
            header.push_str(",power_residual");
        }
        writeln!(out, "{header}")?;
        for k in 0..self.len() {
            let mut line = format!("{:.16e}", self.times[k]);
            for i in 0..n {
                line.push_str(&format!(",{:.16e}", self.states[k][i]));
            }
            line.push_str(&format!(
                ",{:.16e},{:.16e}",
                self.energies[k], self.consistency_residuals[k]
            ));
            if let Some(pr) = &self.power_residuals {
                line.push_str(&format!(",{:.16e}", pr[k]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Integrates from `x0` with fixed step `dt` until `t_final` (⌈t_final/dt⌉
/// steps; a zero-length run returns just the initial sample). The initial
/// state must satisfy the algebraic constraints to within the consistency
/// tolerance unless `project_initial` is set.
pub fn simulate(
    field: &StateField,
    x0: &DVector<f64>,
    dt: f64,
    t_final: f64,
    scheme: Scheme,
) -> Result<Trajectory, DynamicsError> {
    simulate_with(field, x0, dt, t_final, scheme, &SolverOptions::default())
}

/// [`simulate`] with explicit solver options.
pub fn simulate_with(
    field: &StateField,
    x0: &DVector<f64>,
    dt: f64,
    t_final: f64,
    scheme: Scheme,
    opts: &SolverOptions,
) -> Result<Trajectory, DynamicsError> {
    assert!(dt > 0.0, "dt must be positive");
    assert!(t_final >= 0.0, "t_final must be nonnegative");
    let mut x = x0.clone();
    let rep0 = (field.structure_at)(&x);
    if !rep0.is_dirac_valid() {
        return Err(DynamicsError::NonDiracStructure {
            rows: rep0.rows(),
            n: rep0.state_dim(),
            defect: rep0.dirac_defect(),
        });
    }
    let g0 = (field.gradient)(&x);
    let mut initial_residual = least_squares_residual_scaled(
        rep0.flow_mat(),
        &(-(rep0.effort_mat() * &g0)),
        policy().rank_rel_tol,
        1.0,
    );
    if initial_residual > opts.consistency_tol {
        if opts.project_initial {
            x = project_consistent(field, &x, opts)?;
            let rep = (field.structure_at)(&x);
            let g = (field.gradient)(&x);
            initial_residual = least_squares_residual_scaled(
                rep.flow_mat(),
                &(-(rep.effort_mat() * &g)),
                policy().rank_rel_tol,
                1.0,
            );
        }
        if initial_residual > opts.consistency_tol {
            return Err(DynamicsError::InconsistentState {
                residual: initial_residual,
                tol: opts.consistency_tol,
            });
        }
    }

    let steps = if t_final <= 0.0 {
        0
    } else {
        (t_final / dt).ceil() as usize
    };
    let with_ports = field.port_extractor.is_some();
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        energies: Vec::with_capacity(steps + 1),
        consistency_residuals: Vec::with_capacity(steps + 1),
        port_trace: with_ports.then(|| Vec::with_capacity(steps + 1)),
        power_residuals: with_ports.then(|| Vec::with_capacity(steps + 1)),
    };
    traj.times.push(0.0);
    traj.states.push(x.clone());
    traj.energies.push((field.energy)(&x));
    traj.consistency_residuals.push(initial_residual);
    if let Some(extract) = &field.port_extractor {
        let rep = (field.structure_at)(&x);
        let g = (field.gradient)(&x);
        let v0 = min_norm_velocity(&rep, &g);
        traj.port_trace.as_mut().unwrap().push(extract(&x, &v0));
        traj.power_residuals.as_mut().unwrap().push(0.0);
    }

    for k in 1..=steps {
        let result = step(field, &x, dt, scheme, opts).map_err(|e| DynamicsError::AtStep {
            step: k,
            source: Box::new(e),
        })?;
        x = result.state.clone();
        let t = dt * k as f64;
        let energy = (field.energy)(&x);
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.energies.push(energy);
        traj.consistency_residuals.push(result.consistency_residual);
        if let Some(extract) = &field.port_extractor {
            let (u2, a2) = extract(&result.stage_state, &result.velocity);
            let de_dt = (traj.energies[k] - traj.energies[k - 1]) / dt;
            let residual = (de_dt - a2.dot(&u2)).abs();
            traj.port_trace.as_mut().unwrap().push((u2, a2));
            traj.power_residuals.as_mut().unwrap().push(residual);
        }
    }
    Ok(traj)
}

/// Least-squares projection of a state onto the hidden constraint set
/// (Gauss–Newton on the algebraic rows).
fn project_consistent(
    field: &StateField,
    x0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<DVector<f64>, DynamicsError> {
    let n = field.n;
    let constraint = |y: &DVector<f64>| -> DVector<f64> {
        (field.structure_at)(y).algebraic_rows() * (field.gradient)(y)
    };
    let mut x = x0.clone();
    let mut c = constraint(&x);
    let mut iterations = 0;
    while c.amax() > opts.newton_tol && iterations < 50 {
        let k = c.len();
        let mut jac = DMatrix::<f64>::zeros(k, n);
        for j in 0..n {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += h;
            jac.set_column(j, &((constraint(&xp) - &c) / h));
        }
        let dx = min_norm_solve_scaled(&jac, &(-&c), policy().rank_rel_tol, 1.0);
        x += &dx;
        c = constraint(&x);
        iterations += 1;
    }
    Ok(x)
}

/// Summary of the discrete power balance dE/dt = <α2, u2> along a
/// trajectory. Without a port trace this reduces to an energy-drift report.
#[derive(Debug, Clone)]
pub struct PowerBalanceReport {
    pub has_ports: bool,
    /// Per-step residuals |ΔE/Δt − <α2, u2>| (with ports) or |ΔE/Δt|
    /// (without); entry k corresponds to the step ending at sample k.
    pub per_step: Vec<f64>,
    pub max_residual: f64,
    pub mean_residual: f64,
    /// Largest |E(t) − E(0)|.
    pub max_energy_drift: f64,
}

pub fn power_balance(traj: &Trajectory) -> PowerBalanceReport {
    let mut per_step = Vec::with_capacity(traj.len().saturating_sub(1));
    match &traj.power_residuals {
        Some(pr) => {
            per_step.extend(pr.iter().skip(1).copied());
        }
        None => {
            for k in 1..traj.len() {
                let dt = traj.times[k] - traj.times[k - 1];
                per_step.push(((traj.energies[k] - traj.energies[k - 1]) / dt).abs());
            }
        }
    }
    let max_residual = per_step.iter().copied().fold(0.0, f64::max);
    let mean_residual = if per_step.is_empty() {
        0.0
    } else {
        per_step.iter().sum::<f64>() / per_step.len() as f64
    };
    PowerBalanceReport {
        has_ports: traj.power_residuals.is_some(),
        per_step,
        max_residual,
        mean_residual,
        max_energy_drift: traj.max_energy_drift(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::TwoForm;
    use approx::assert_abs_diff_eq;

    fn oscillator_field() -> StateField {
        // D = graph of the canonical symplectic form on R², E = (q² + p²)/2.
        let d = LinearStructure::graph_of_form(&TwoForm::canonical_symplectic(1)).unwrap();
        let rep = kernel_rep_of(&d).unwrap();
        StateField {
            n: 2,
            structure_at: Box::new(move |_| rep.clone()),
            energy: Box::new(|x| 0.5 * (x[0] * x[0] + x[1] * x[1])),
            gradient: Box::new(|x| x.clone()),
            port_extractor: None,
        }
    }

    #[test]
    fn kernel_rep_of_graph_matches_direct_rows() {
        // D = graph ω has the kernel description −ω v + α = 0.
        let omega = TwoForm::canonical_symplectic(2);
        let d = LinearStructure::graph_of_form(&omega).unwrap();
        let rep = kernel_rep_of(&d).unwrap();
        assert_eq!(rep.rows(), 4);
        assert!(rep.is_dirac_valid());
        let direct = KernelRep::new(-omega.mat.clone(), DMatrix::identity(4, 4));
        assert!(rep
            .as_structure()
            .unwrap()
            .span()
            .equals(direct.as_structure().unwrap().span())
            .unwrap());
        assert!(rep
            .as_structure()
            .unwrap()
            .span()
            .equals(d.span())
            .unwrap());
    }

    #[test]
    fn kernel_rep_of_flow_annihilator_splits() {
        let f = Subspace::span(3, &[DVector::from_column_slice(&[1.0, 1.0, 0.0])]);
        let d = LinearStructure::from_flow_space(&f).unwrap();
        let rep = kernel_rep_of(&d).unwrap();
        assert!(rep.is_dirac_valid());
        assert!(rep
            .as_structure()
            .unwrap()
            .span()
            .equals(d.span())
            .unwrap());
    }

    #[test]
    fn free_structure_freezes_state_under_constant_energy() {
        // D = R^n ⊕ {0}: efforts must vanish, flows are unconstrained; with
        // a constant energy the minimum-norm velocity is zero.
        let d = LinearStructure::from_flow_space(&Subspace::full(2)).unwrap();
        let rep = kernel_rep_of(&d).unwrap();
        let field = StateField {
            n: 2,
            structure_at: Box::new(move |_| rep.clone()),
            energy: Box::new(|_| 1.0),
            gradient: Box::new(|x| DVector::zeros(x.len())),
            port_extractor: None,
        };
        let x0 = DVector::from_column_slice(&[0.3, -0.7]);
        let traj = simulate(&field, &x0, 0.1, 1.0, Scheme::Midpoint).unwrap();
        assert_abs_diff_eq!(traj.final_state().clone(), x0, epsilon = 1e-14);
    }

    #[test]
    fn free_structure_rejects_nonzero_gradient() {
        // With D = R^n ⊕ {0} the inclusion forces dE = 0; anything else is
        // an inconsistent DAE.
        let d = LinearStructure::from_flow_space(&Subspace::full(2)).unwrap();
        let rep = kernel_rep_of(&d).unwrap();
        let field = StateField {
            n: 2,
            structure_at: Box::new(move |_| rep.clone()),
            energy: Box::new(|x| x[0]),
            gradient: Box::new(|x| {
                let mut g = DVector::zeros(x.len());
                g[0] = 1.0;
                g
            }),
            port_extractor: None,
        };
        let x0 = DVector::from_column_slice(&[0.0, 0.0]);
        match simulate(&field, &x0, 0.1, 1.0, Scheme::Midpoint) {
            Err(DynamicsError::InconsistentState { .. }) => {}
            other => panic!("expected inconsistency, got {other:?}"),
        }
    }

    #[test]
    fn midpoint_conserves_oscillator_energy_per_step() {
        let field = oscillator_field();
        let x0 = DVector::from_column_slice(&[1.0, 0.0]);
        let r = step(&field, &x0, 0.01, Scheme::Midpoint, &SolverOptions::default()).unwrap();
        let e0 = (field.energy)(&x0);
        let e1 = (field.energy)(&r.state);
        assert!((e1 - e0).abs() <= 1e-10, "drift {}", (e1 - e0).abs());
    }

    #[test]
    fn zero_length_run_returns_initial_sample() {
        let field = oscillator_field();
        let x0 = DVector::from_column_slice(&[1.0, 0.0]);
        let traj = simulate(&field, &x0, 0.01, 0.0, Scheme::Midpoint).unwrap();
        assert_eq!(traj.len(), 1);
        assert_abs_diff_eq!(traj.states[0].clone(), x0, epsilon = 0.0);
    }

    #[test]
    fn oscillator_long_run_energy_bound() {
        let field = oscillator_field();
        let x0 = DVector::from_column_slice(&[1.0, 0.0]);
        let traj = simulate(&field, &x0, 0.01, 100.0, Scheme::Midpoint).unwrap();
        assert_eq!(traj.len(), 10_001);
        assert!(
            traj.max_energy_drift() <= 1e-8,
            "drift {}",
            traj.max_energy_drift()
        );
    }

    #[test]
    fn rk4_runs_and_approximates_oscillator() {
        let field = oscillator_field();
        let x0 = DVector::from_column_slice(&[1.0, 0.0]);
        let traj = simulate(&field, &x0, 0.01, 1.0, Scheme::Rk4).unwrap();
        // Exact solution: q = cos t, p = −sin t.
        let t = traj.times.last().unwrap();
        assert_abs_diff_eq!(traj.final_state()[0], t.cos(), epsilon = 1e-8);
        assert_abs_diff_eq!(traj.final_state()[1], -t.sin(), epsilon = 1e-8);
    }

    #[test]
    fn schemes_converge_at_expected_order() {
        // dt-halving regression on the oscillator over t ∈ [0, 1].
        let field = oscillator_field();
        let x0 = DVector::from_column_slice(&[1.0, 0.0]);
        let exact = DVector::from_column_slice(&[1.0f64.cos(), -(1.0f64.sin())]);
        let orders = |scheme: Scheme| -> f64 {
            let dts = [0.02, 0.01, 0.005, 0.0025];
            let errs: Vec<f64> = dts
                .iter()
                .map(|&dt| {
                    let traj = simulate(&field, &x0, dt, 1.0, scheme).unwrap();
                    (traj.final_state() - &exact).norm()
                })
                .collect();
            // Least-squares slope of log err against log dt.
            let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
            let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
            let mx = lx.iter().sum::<f64>() / lx.len() as f64;
            let my = ly.iter().sum::<f64>() / ly.len() as f64;
            let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
            let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
            num / den
        };
        let midpoint_order = orders(Scheme::Midpoint);
        assert!(
            (midpoint_order - 2.0).abs() <= 0.2,
            "midpoint order {midpoint_order}"
        );
        let rk4_order = orders(Scheme::Rk4);
        assert!(rk4_order >= 1.8, "rk4 order {rk4_order}");
    }

    #[test]
    fn constant_gradient_affine_flow_is_exact() {
        // Structure fixed, dE constant: one step lands exactly on the affine
        // solution set x + dt·v with E v = −F dE.
        let d = LinearStructure::graph_of_form(&TwoForm::canonical_symplectic(1)).unwrap();
        let rep = kernel_rep_of(&d).unwrap();
        let rep2 = rep.clone();
        let field = StateField {
            n: 2,
            structure_at: Box::new(move |_| rep.clone()),
            energy: Box::new(|x| x[0] + 2.0 * x[1]),
            gradient: Box::new(|_| DVector::from_column_slice(&[1.0, 2.0])),
            port_extractor: None,
        };
        let x0 = DVector::from_column_slice(&[0.0, 0.0]);
        let dt = 0.25;
        let r = step(&field, &x0, dt, Scheme::Midpoint, &SolverOptions::default()).unwrap();
        let expected_v = min_norm_velocity(&rep2, &DVector::from_column_slice(&[1.0, 2.0]));
        assert_abs_diff_eq!(r.state, x0 + dt * expected_v, epsilon = 1e-12);
        assert!(r.consistency_residual <= 1e-12);
    }

    #[test]
    fn power_balance_without_ports_is_drift_report() {
        let field = oscillator_field();
        let x0 = DVector::from_column_slice(&[1.0, 0.0]);
        let traj = simulate(&field, &x0, 0.01, 1.0, Scheme::Midpoint).unwrap();
        let report = power_balance(&traj);
        assert!(!report.has_ports);
        assert!(report.max_residual <= 1e-8);
        assert!(report.max_energy_drift <= 1e-10);
    }

    #[test]
    fn csv_shape_matches_contract() {
        let field = oscillator_field();
        let x0 = DVector::from_column_slice(&[1.0, 0.0]);
        let traj = simulate(&field, &x0, 0.01, 0.05, Scheme::Midpoint).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x0,x1,E,consistency_residual");
        assert_eq!(lines.count(), traj.len());
    }

    #[test]
    fn gradient_check_flags_mismatch() {
        let field = oscillator_field();
        let probes = vec![DVector::from_column_slice(&[0.4, -1.1])];
        assert!(field.gradient_check(&probes) <= 1e-6);
        let bad = StateField {
            n: 2,
            structure_at: field.structure_at,
            energy: Box::new(|x| 0.5 * (x[0] * x[0] + x[1] * x[1])),
            gradient: Box::new(|x| 2.0 * x),
            port_extractor: None,
        };
        assert!(bad.gradient_check(&probes) > 1e-2);
    }
}
