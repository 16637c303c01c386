//! LC circuits from a netlist, on the state space (q, v, p): branch charges,
//! branch currents and conjugate momenta. Kirchhoff's current law defines a
//! distribution Δ on the charges; the structure is built from the lift of Δ
//! and the pullback of the canonical (charge, momentum) two-form, which in
//! these block coordinates sends (q̇, v̇, ṗ) to the covector (−ṗ, 0, q̇).
//!
//! Port branches carry no element; their currents are exposed through a
//! selection map and closed by a chosen Dirac structure on the port space.
//! The voltage-law covectors are computed as the annihilator of the
//! current-law distribution, never specified independently.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::dirac::{from_pair, LinearStructure, TwoForm};
use crate::dynamics::{kernel_rep_of, StateField};
use crate::iostruct::IoStructure;
use crate::subspace::{null_space, Subspace};
use crate::transfer::LinearMapSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchKind {
    #[serde(rename = "L")]
    Inductor,
    #[serde(rename = "C")]
    Capacitor,
    #[serde(rename = "port")]
    Port,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub id: String,
    pub kind: BranchKind,
    /// Inductance or capacitance; ignored for ports.
    #[serde(default)]
    pub value: f64,
}

/// Branch list, current-law rows over the branch currents, and the ids of
/// the port branches in port order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Netlist {
    pub branches: Vec<Branch>,
    pub kcl: Vec<Vec<f64>>,
    #[serde(default)]
    pub ports: Vec<String>,
}

impl Netlist {
    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn branch_index(&self, id: &str) -> Option<usize> {
        self.branches.iter().position(|b| b.id == id)
    }

    fn kcl_matrix(&self) -> DMatrix<f64> {
        let rows = self.kcl.len();
        let b = self.branch_count();
        let mut m = DMatrix::zeros(rows, b);
        for (i, row) in self.kcl.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        m
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.branches.is_empty() {
            return Err(ModelError::InvalidNetlist("no branches".into()));
        }
        for b in &self.branches {
            if b.kind != BranchKind::Port && b.value <= 0.0 {
                return Err(ModelError::InvalidNetlist(format!(
                    "branch {} has nonpositive value {}",
                    b.id, b.value
                )));
            }
        }
        for row in &self.kcl {
            if row.len() != self.branch_count() {
                return Err(ModelError::InvalidNetlist(format!(
                    "KCL row length {} does not match {} branches",
                    row.len(),
                    self.branch_count()
                )));
            }
        }
        if !self.kcl.is_empty() {
            let m = self.kcl_matrix();
            let rank = Subspace::canonicalize(&m.transpose()).dim();
            if rank != self.kcl.len() {
                return Err(ModelError::InvalidNetlist(format!(
                    "KCL rows are rank deficient ({} independent of {})",
                    rank,
                    self.kcl.len()
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &self.ports {
            let idx = self
                .branch_index(id)
                .ok_or_else(|| ModelError::InvalidNetlist(format!("unknown port id {id}")))?;
            if self.branches[idx].kind != BranchKind::Port {
                return Err(ModelError::InvalidNetlist(format!(
                    "branch {id} is listed as a port but has kind {:?}",
                    self.branches[idx].kind
                )));
            }
            if !seen.insert(id.clone()) {
                return Err(ModelError::InvalidNetlist(format!("duplicate port id {id}")));
            }
        }
        let declared_ports = self
            .branches
            .iter()
            .filter(|b| b.kind == BranchKind::Port)
            .count();
        if declared_ports != self.ports.len() {
            return Err(ModelError::InvalidNetlist(format!(
                "{declared_ports} port branches but {} entries in `ports`",
                self.ports.len()
            )));
        }
        Ok(())
    }
}

/// A built circuit: the current-law distribution, the structure on the full
/// state space, the input-output record when ports exist, and the simulable
/// field (present when the circuit is closed or portless).
pub struct LcSystem {
    pub netlist: Netlist,
    /// KCL distribution Δ over the branch currents.
    pub current_distribution: Subspace,
    /// The lifted structure on (q, v, p) before any port handling.
    pub state_structure: LinearStructure,
    /// OBIO when ports are open, BIO after closure, `None` for portless
    /// netlists.
    pub io: Option<IoStructure>,
    /// The structure that generates the dynamics (equals `state_structure`
    /// for portless netlists, the closed effective structure otherwise).
    pub effective: LinearStructure,
    pub field: Option<StateField>,
}

impl LcSystem {
    pub fn state_dim(&self) -> usize {
        3 * self.netlist.branch_count()
    }

    /// Assembles a state (q, v, p) with momenta matching the currents
    /// (p_i = L_i v_i on inductor branches, 0 elsewhere).
    pub fn state_from(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let b = self.netlist.branch_count();
        assert_eq!(q.len(), b);
        assert_eq!(v.len(), b);
        let mut x = DVector::zeros(3 * b);
        x.rows_mut(0, b).copy_from(q);
        x.rows_mut(b, b).copy_from(v);
        for (i, branch) in self.netlist.branches.iter().enumerate() {
            if branch.kind == BranchKind::Inductor {
                x[2 * b + i] = branch.value * v[i];
            }
        }
        x
    }

    pub fn charges<'a>(&self, x: &'a DVector<f64>) -> nalgebra::DVectorView<'a, f64> {
        x.rows(0, self.netlist.branch_count())
    }

    pub fn currents<'a>(&self, x: &'a DVector<f64>) -> nalgebra::DVectorView<'a, f64> {
        let b = self.netlist.branch_count();
        x.rows(b, b)
    }
}

fn energy_terms(netlist: &Netlist) -> (Vec<f64>, Vec<f64>) {
    let l_vals = netlist
        .branches
        .iter()
        .map(|b| match b.kind {
            BranchKind::Inductor => b.value,
            _ => 0.0,
        })
        .collect();
    let inv_c = netlist
        .branches
        .iter()
        .map(|b| match b.kind {
            BranchKind::Capacitor => 1.0 / b.value,
            _ => 0.0,
        })
        .collect();
    (l_vals, inv_c)
}

/// Builds the circuit. `port_closure`, when given, must be a Dirac structure
/// on the port space (flows = port currents, efforts = port voltages); it is
/// required to obtain a simulable field when ports exist.
pub fn build_lc(
    netlist: &Netlist,
    port_closure: Option<&LinearStructure>,
) -> Result<LcSystem, ModelError> {
    netlist.validate()?;
    let b = netlist.branch_count();
    let n = 3 * b;

    let delta = if netlist.kcl.is_empty() {
        Subspace::full(b)
    } else {
        null_space(&netlist.kcl_matrix())
    };

    // Lift of Δ to (q, v, p): currents constrained, the rest free.
    let mut lift_raw = DMatrix::<f64>::zeros(n, delta.dim() + 2 * b);
    lift_raw
        .view_mut((0, 0), (b, delta.dim()))
        .copy_from(delta.basis());
    lift_raw
        .view_mut((b, delta.dim()), (2 * b, 2 * b))
        .copy_from(&DMatrix::identity(2 * b, 2 * b));
    let lifted = Subspace::canonicalize(&lift_raw);

    // Pullback of the canonical two-form: (q̇, v̇, ṗ) ↦ (−ṗ, 0, q̇).
    let mut omega = DMatrix::<f64>::zeros(n, n);
    for i in 0..b {
        omega[(i, 2 * b + i)] = -1.0;
        omega[(2 * b + i, i)] = 1.0;
    }
    let state_structure = from_pair(&lifted, &TwoForm::new(omega)?)?;

    let (l_vals, inv_c) = energy_terms(netlist);
    let energy = {
        let l_vals = l_vals.clone();
        let inv_c = inv_c.clone();
        move |x: &DVector<f64>| -> f64 {
            let mut e = 0.0;
            for i in 0..b {
                let q = x[i];
                let v = x[b + i];
                let p = x[2 * b + i];
                e += p * v - 0.5 * l_vals[i] * v * v + 0.5 * inv_c[i] * q * q;
            }
            e
        }
    };
    let gradient = {
        let l_vals = l_vals.clone();
        let inv_c = inv_c.clone();
        move |x: &DVector<f64>| -> DVector<f64> {
            let mut g = DVector::zeros(3 * b);
            for i in 0..b {
                g[i] = inv_c[i] * x[i];
                g[b + i] = x[2 * b + i] - l_vals[i] * x[b + i];
                g[2 * b + i] = x[b + i];
            }
            g
        }
    };

    let port_count = netlist.ports.len();
    let (io, effective) = if port_count == 0 {
        if port_closure.is_some() {
            return Err(ModelError::InvalidNetlist(
                "port closure given but the netlist has no ports".into(),
            ));
        }
        (None, state_structure.clone())
    } else {
        // Port map: select the charge velocities of the port branches.
        let mut p_mat = DMatrix::<f64>::zeros(port_count, n);
        for (j, id) in netlist.ports.iter().enumerate() {
            let idx = netlist.branch_index(id).expect("validated above");
            p_mat[(j, idx)] = 1.0;
        }
        let open = IoStructure::open_backward(
            state_structure.clone(),
            port_count,
            LinearMapSpec::new(p_mat),
        )?;
        match port_closure {
            None => {
                let sigma = open.effective_structure()?;
                (Some(open), sigma)
            }
            Some(d_ports) => {
                let closed = open.interconnect(d_ports)?;
                let eff = closed.effective_structure()?;
                (Some(closed), eff)
            }
        }
    };

    let field = if effective.is_dirac() {
        let rep = kernel_rep_of(&effective)?;
        let energy_cb = energy.clone();
        let gradient_cb = gradient.clone();
        let port_extractor = io.as_ref().map(|io| {
            let io = io.clone();
            let grad = gradient.clone();
            Box::new(move |x: &DVector<f64>, v: &DVector<f64>| {
                let w = io.witness_unchecked(v, &grad(x));
                (w.u2, w.alpha2)
            }) as Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> (DVector<f64>, DVector<f64>) + Send + Sync>
        });
        Some(StateField {
            n,
            structure_at: Box::new(move |_| rep.clone()),
            energy: Box::new(energy_cb),
            gradient: Box::new(gradient_cb),
            port_extractor,
        })
    } else {
        None
    };

    Ok(LcSystem {
        netlist: netlist.clone(),
        current_distribution: delta,
        state_structure,
        io,
        effective,
        field,
    })
}
