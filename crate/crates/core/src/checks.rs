//! Seeded property-check batteries over randomly generated structures.
//!
//! Each suite draws its instances from a deterministic stream derived from
//! the run seed, so identical configurations produce byte-identical reports.
//! The suites re-verify the load-bearing identities of the crate: closure of
//! the Dirac constructions, functoriality and classification preservation of
//! the transfer maps, the composition against its independent witness-set
//! evaluation, decomposition round-trips, the twist duality, and the
//! equivalence of port interconnection with composition.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dirac::{
    coisotropic_decompose, from_bivector, from_pair, isotropic_decompose, range_and_form, twist,
    Bivector, LinearStructure, StructureClass, TwoForm,
};
use crate::dynamics::kernel_rep_of;
use crate::iostruct::IoStructure;
use crate::subspace::Subspace;
use crate::transfer::{
    backward, compose, compose_witness_set, duality_transport, forward, tensor_product,
    ComposeDims, LinearMapSpec,
};

/// Deterministic random generators for structures, shared by the check
/// batteries and the test suites.
pub mod gen {
    use super::*;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    pub fn skew(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let m = matrix(rng, n, n);
        0.5 * (&m - m.transpose())
    }

    pub fn subspace(rng: &mut ChaCha8Rng, ambient: usize, dim: usize) -> Subspace {
        if dim == 0 {
            return Subspace::zero(ambient);
        }
        Subspace::canonicalize(&matrix(rng, ambient, dim))
    }

    /// A random Dirac structure on R^n, built through one of the two
    /// canonical constructions.
    pub fn dirac(rng: &mut ChaCha8Rng, n: usize) -> LinearStructure {
        if rng.gen_bool(0.5) {
            let dim = rng.gen_range(0..=n);
            let f = subspace(rng, n, dim);
            let omega = TwoForm::new(skew(rng, n)).expect("skew by construction");
            from_pair(&f, &omega).expect("pair construction is total")
        } else {
            let dim = rng.gen_range(0..=n);
            let c = subspace(rng, n, dim);
            let lambda = Bivector::new(skew(rng, n)).expect("skew by construction");
            from_bivector(&lambda, &c).expect("bivector construction is total")
        }
    }

    /// A random isotropic structure: a random subspace of a random Dirac
    /// structure.
    pub fn isotropic(rng: &mut ChaCha8Rng, n: usize) -> LinearStructure {
        let d = dirac(rng, n);
        let k = rng.gen_range(0..=d.dim());
        let span = Subspace::canonicalize(&(d.span().basis() * matrix(rng, d.dim(), k)));
        LinearStructure::from_span(span).expect("subspace of a Dirac structure is isotropic")
    }

    /// A random coisotropic structure: the pairing-orthogonal of a random
    /// isotropic one.
    pub fn coisotropic(rng: &mut ChaCha8Rng, n: usize) -> LinearStructure {
        let iso = isotropic(rng, n);
        LinearStructure::from_span(iso.span().pairing_orthogonal().expect("even ambient"))
            .expect("orthogonal of isotropic is coisotropic")
    }

    /// A random open forward record: Dirac state structure and a dense
    /// coupling.
    pub fn open_forward_record(
        rng: &mut ChaCha8Rng,
        u1: usize,
        u2: usize,
    ) -> IoStructure {
        let d = dirac(rng, u1);
        let g = LinearMapSpec::new(matrix(rng, u1, u2));
        IoStructure::open_forward(d, u2, g).expect("open record construction")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckConfig {
    pub seed: u64,
    pub cases: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            seed: 0,
            cases: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest residual observed across the suite (projector distances or
    /// pointwise defects, depending on the property).
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema: String,
    pub seed: u64,
    pub cases: usize,
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
}

struct SuiteRun {
    name: &'static str,
    cases: usize,
    failures: usize,
    max_residual: f64,
}

impl SuiteRun {
    fn new(name: &'static str) -> SuiteRun {
        SuiteRun {
            name,
            cases: 0,
            failures: 0,
            max_residual: 0.0,
        }
    }

    fn record(&mut self, ok: bool, residual: f64) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
        }
        if residual.is_nan() {
            self.failures += 1;
            self.max_residual = f64::NAN;
        } else {
            self.max_residual = self.max_residual.max(residual);
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            name: self.name.to_string(),
            cases: self.cases,
            failures: self.failures,
            max_residual: self.max_residual,
        }
    }
}

fn projector_distance(a: &Subspace, b: &Subspace) -> f64 {
    (a.projector() - b.projector()).norm()
}

fn suite_seed(config: &CheckConfig, index: u64) -> u64 {
    config.seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Subspace arithmetic: Grassmann dimension identity against an independent
/// rank oracle, plus the pairing and annihilator involutions.
pub fn suite_subspace_algebra(config: &CheckConfig) -> SuiteResult {
    let mut rng = gen::rng(suite_seed(config, 1));
    let mut run = SuiteRun::new("subspace_algebra");
    for _ in 0..config.cases {
        let ambient = rng.gen_range(1..=6);
        let da = rng.gen_range(0..=ambient);
        let db = rng.gen_range(0..=ambient);
        let a = gen::subspace(&mut rng, ambient, da);
        let b = gen::subspace(&mut rng, ambient, db);
        let sum = a.sum(&b).expect("same ambient");
        let cap = a.intersect(&b).expect("same ambient");
        // Independent rank oracle: rank of the concatenated bases.
        let stacked = crate::subspace::hstack(&[a.basis(), b.basis()]);
        let sum_rank_oracle = Subspace::canonicalize(&stacked).dim();
        let grassmann_ok = a.dim() + b.dim() == sum.dim() + cap.dim();
        let oracle_ok = sum.dim() == sum_rank_oracle;
        let contained = sum.contains(&a).unwrap()
            && sum.contains(&b).unwrap()
            && a.contains(&cap).unwrap()
            && b.contains(&cap).unwrap();

        // Involutions on an even-dimensional sibling.
        let even = 2 * rng.gen_range(1..=3usize);
        let even_dim = rng.gen_range(0..=even);
        let s = gen::subspace(&mut rng, even, even_dim);
        let invol = projector_distance(
            &s.pairing_orthogonal().unwrap().pairing_orthogonal().unwrap(),
            &s,
        );
        let ann = projector_distance(&s.annihilator().annihilator(), &s);
        let residual = invol.max(ann);
        run.record(
            grassmann_ok && oracle_ok && contained && residual <= 1e-9,
            residual,
        );
    }
    run.finish()
}

/// Both canonical constructions yield maximally isotropic structures of the
/// right dimension with vanishing pairing.
pub fn suite_dirac_axioms(config: &CheckConfig) -> SuiteResult {
    let mut rng = gen::rng(suite_seed(config, 2));
    let mut run = SuiteRun::new("dirac_axioms");
    for _ in 0..config.cases {
        let n = rng.gen_range(1..=6);
        let d = gen::dirac(&mut rng, n);
        let residual = d.max_pairing_residual();
        let ok = d.class() == StructureClass::Dirac && d.dim() == n && residual <= 1e-9;
        run.record(ok, residual);
    }
    run.finish()
}

/// Forward and backward are functorial: F(φ∘ψ) = Fφ ∘ Fψ and
/// B(φ∘ψ) = Bψ ∘ Bφ.
pub fn suite_functoriality(config: &CheckConfig) -> SuiteResult {
    let mut rng = gen::rng(suite_seed(config, 3));
    let mut run = SuiteRun::new("functoriality");
    for _ in 0..config.cases {
        let n1 = rng.gen_range(1..=5);
        let n2 = rng.gen_range(1..=5);
        let n3 = rng.gen_range(1..=5);
        let phi2 = LinearMapSpec::new(gen::matrix(&mut rng, n2, n1));
        let phi1 = LinearMapSpec::new(gen::matrix(&mut rng, n3, n2));
        let composed = phi1.compose_with(&phi2);

        let d1 = gen::dirac(&mut rng, n1);
        let fwd_once = forward(&composed, &d1).unwrap();
        let fwd_twice = forward(&phi1, &forward(&phi2, &d1).unwrap()).unwrap();
        let r_fwd = projector_distance(fwd_once.span(), fwd_twice.span());

        let d3 = gen::dirac(&mut rng, n3);
        let bwd_once = backward(&composed, &d3).unwrap();
        let bwd_twice = backward(&phi2, &backward(&phi1, &d3).unwrap()).unwrap();
        let r_bwd = projector_distance(bwd_once.span(), bwd_twice.span());

        let residual = r_fwd.max(r_bwd);
        run.record(residual <= 1e-9, residual);
    }
    run.finish()
}

/// Transfer preserves isotropy and coisotropy in both directions, and Dirac
/// maps to Dirac.
pub fn suite_classification_transfer(config: &CheckConfig) -> SuiteResult {
    let mut rng = gen::rng(suite_seed(config, 4));
    let mut run = SuiteRun::new("classification_transfer");
    for _ in 0..config.cases {
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=5);
        let phi = LinearMapSpec::new(gen::matrix(&mut rng, m, n));

        let iso = gen::isotropic(&mut rng, n);
        let co = gen::coisotropic(&mut rng, n);
        let d = gen::dirac(&mut rng, n);
        let iso_w = gen::isotropic(&mut rng, m);
        let co_w = gen::coisotropic(&mut rng, m);

        let ok = forward(&phi, &iso).unwrap().class().is_isotropic()
            && forward(&phi, &co).unwrap().class().is_coisotropic()
            && forward(&phi, &d).unwrap().class() == StructureClass::Dirac
            && backward(&phi, &iso_w).unwrap().class().is_isotropic()
            && backward(&phi, &co_w).unwrap().class().is_coisotropic();
        run.record(ok, 0.0);
    }
    run.finish()
}

/// The composition equals its independent witness-set evaluation and is
/// Dirac, on instances with total dimension at most 12.
pub fn suite_composition_oracle(config: &CheckConfig) -> SuiteResult {
    let mut rng = gen::rng(suite_seed(config, 5));
    let mut run = SuiteRun::new("composition_oracle");
    for _ in 0..config.cases {
        let u1 = rng.gen_range(1..=3);
        let u2 = rng.gen_range(1..=3);
        let v1 = rng.gen_range(1..=3);
        let v2 = rng.gen_range(1..=3);
        let dims = ComposeDims { u1, u2, v1, v2 };
        let da = gen::dirac(&mut rng, u1 + u2);
        let db = gen::dirac(&mut rng, v1 + v2);
        let di = gen::dirac(&mut rng, u2 + v2);
        let lhs = compose(&da, &db, &di, dims).unwrap();
        let rhs = compose_witness_set(&da, &db, &di, dims).unwrap();
        let residual = projector_distance(lhs.span(), rhs.span());
        let ok = residual <= 1e-9 && lhs.class() == StructureClass::Dirac;
        run.record(ok, residual);
    }
    run.finish()
}

/// Isotropic decomposition round-trip; Dirac inputs have no effort gap; the
/// orthogonal's flow range is the flow range extended by the gap.
pub fn suite_isotropic_roundtrip(config: &CheckConfig) -> SuiteResult {
    let mut rng = gen::rng(suite_seed(config, 6));
    let mut run = SuiteRun::new("isotropic_roundtrip");
    for _ in 0..config.cases {
        let n = rng.gen_range(1..=5);
        let s = gen::isotropic(&mut rng, n);
        let parts = isotropic_decompose(&s).unwrap();
        let rebuilt = parts.reconstruct().unwrap();
        let residual = projector_distance(rebuilt.span(), s.span());
        let orth = s.span().pairing_orthogonal().unwrap();
        let orth_flow = LinearStructure::from_span(orth).unwrap().flow_projection();
        let extended = parts.flow.sum(&parts.gap).unwrap();
        let r_flow = projector_distance(&orth_flow, &extended);
        let gap_ok = if s.class() == StructureClass::Dirac {
            parts.gap.dim() == 0
        } else {
            true
        };
        let residual = residual.max(r_flow);
        run.record(residual <= 1e-9 && gap_ok, residual);
    }
    run.finish()
}

/// Coisotropic decomposition round-trip, including recovery of the paired
/// block from structures built as D ⊕ (F₂ ⊕ F₂*).
pub fn suite_coisotropic_roundtrip(config: &CheckConfig) -> SuiteResult {
    let mut rng = gen::rng(suite_seed(config, 7));
    let mut run = SuiteRun::new("coisotropic_roundtrip");
    for _ in 0..config.cases {
        let n = rng.gen_range(1..=5);
        let s = gen::coisotropic(&mut rng, n);
        let parts = coisotropic_decompose(&s).unwrap();
        let rebuilt = parts.reconstruct().unwrap();
        let mut residual = projector_distance(rebuilt.span(), s.span());

        // Constructive recovery: a Dirac block extended by a full coisotropic
        // factor has that factor's dimensions as its gap.
        let nd = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=2);
        let d = gen::dirac(&mut rng, nd);
        let product =
            LinearStructure::direct_sum(&[&d, &LinearStructure::full_space(k)]).unwrap();
        let parts2 = coisotropic_decompose(&product).unwrap();
        let gap_ok = parts2.gap.dim() == k;
        let rebuilt2 = parts2.reconstruct().unwrap();
        residual = residual.max(projector_distance(rebuilt2.span(), product.span()));
        run.record(residual <= 1e-9 && gap_ok, residual);
    }
    run.finish()
}

/// The twist is an involution preserving classification, and it intertwines
/// forward with the backward of the dual map.
pub fn suite_twist_duality(config: &CheckConfig) -> SuiteResult {
    let mut rng = gen::rng(suite_seed(config, 8));
    let mut run = SuiteRun::new("twist_duality");
    for _ in 0..config.cases {
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=4);
        let d = gen::dirac(&mut rng, n);
        let twice = twist(&twist(&d));
        let r_invol = projector_distance(twice.span(), d.span());
        let class_ok = twist(&d).class() == d.class();
        let phi = LinearMapSpec::new(gen::matrix(&mut rng, m, n));
        let report = duality_transport(&phi, &d).unwrap();
        let residual = r_invol.max(report.projector_distance);
        run.record(residual <= 1e-9 && class_ok && report.equal, residual);
    }
    run.finish()
}

/// Tensor product: unit element, commutativity, and the graph-sum identity.
pub fn suite_tensor_product(config: &CheckConfig) -> SuiteResult {
    let mut rng = gen::rng(suite_seed(config, 9));
    let mut run = SuiteRun::new("tensor_product");
    for _ in 0..config.cases {
        let n = rng.gen_range(1..=4);
        let d1 = gen::dirac(&mut rng, n);
        let d2 = gen::dirac(&mut rng, n);
        let t12 = tensor_product(&d1, &d2).unwrap();
        let t21 = tensor_product(&d2, &d1).unwrap();
        let mut residual = projector_distance(t12.span(), t21.span());

        let unit = LinearStructure::from_flow_space(&Subspace::full(n)).unwrap();
        let with_unit = tensor_product(&d1, &unit).unwrap();
        residual = residual.max(projector_distance(with_unit.span(), d1.span()));

        let m1 = gen::skew(&mut rng, n);
        let m2 = gen::skew(&mut rng, n);
        let g1 = LinearStructure::graph_of_form(&TwoForm::new(m1.clone()).unwrap()).unwrap();
        let g2 = LinearStructure::graph_of_form(&TwoForm::new(m2.clone()).unwrap()).unwrap();
        let sum = LinearStructure::graph_of_form(&TwoForm::new(&m1 + &m2).unwrap()).unwrap();
        let t = tensor_product(&g1, &g2).unwrap();
        residual = residual.max(projector_distance(t.span(), sum.span()));
        run.record(residual <= 1e-9, residual);
    }
    run.finish()
}

/// Kernel representation round-trip and kernel-form Dirac validity.
pub fn suite_kernel_roundtrip(config: &CheckConfig) -> SuiteResult {
    let mut rng = gen::rng(suite_seed(config, 10));
    let mut run = SuiteRun::new("kernel_roundtrip");
    for _ in 0..config.cases {
        let n = rng.gen_range(1..=6);
        let d = gen::dirac(&mut rng, n);
        let rep = kernel_rep_of(&d).unwrap();
        let back = rep.as_structure().unwrap();
        let residual = projector_distance(back.span(), d.span()).max(rep.dirac_defect());
        run.record(rep.is_dirac_valid() && residual <= 1e-9, residual);
    }
    run.finish()
}

/// Range-and-form extraction inverts the canonical construction.
pub fn suite_range_form_roundtrip(config: &CheckConfig) -> SuiteResult {
    let mut rng = gen::rng(suite_seed(config, 11));
    let mut run = SuiteRun::new("range_form_roundtrip");
    for _ in 0..config.cases {
        let n = rng.gen_range(1..=5);
        let d = gen::dirac(&mut rng, n);
        let rf = range_and_form(&d).unwrap();
        let rebuilt = from_pair(&rf.range, &rf.ambient_form()).unwrap();
        let residual = projector_distance(rebuilt.span(), d.span());
        run.record(residual <= 1e-9, residual);
    }
    run.finish()
}

/// Interconnecting a product of open forward records by a Dirac port
/// structure agrees with composing the corresponding port-bearing Dirac
/// structures through the same interconnection.
pub fn suite_interconnection_equivalence(config: &CheckConfig) -> SuiteResult {
    let mut rng = gen::rng(suite_seed(config, 12));
    let mut run = SuiteRun::new("interconnection_equivalence");
    for _ in 0..config.cases {
        let u1 = rng.gen_range(1..=3);
        let u2 = rng.gen_range(1..=2);
        let v1 = rng.gen_range(1..=3);
        let v2 = rng.gen_range(1..=2);
        let a1 = gen::open_forward_record(&mut rng, u1, u2);
        let a2 = gen::open_forward_record(&mut rng, v1, v2);
        let d_ports = gen::dirac(&mut rng, u2 + v2);

        let product = IoStructure::product(&[&a1, &a2]).unwrap();
        let closed = product.interconnect(&d_ports).unwrap();
        let lhs = closed.effective_structure().unwrap();

        let rhs = compose(
            &a1.ph_structure().unwrap(),
            &a2.ph_structure().unwrap(),
            &d_ports,
            ComposeDims { u1, u2, v1, v2 },
        )
        .unwrap();
        let residual = projector_distance(lhs.span(), rhs.span());
        run.record(residual <= 1e-9, residual);
    }
    run.finish()
}

/// Effective structures classify as the theory demands: Dirac with flow
/// dimension u1 for closed kinds, coisotropic for open kinds; and closing
/// the ports of an open record only shrinks the effective structure.
pub fn suite_io_effective_classes(config: &CheckConfig) -> SuiteResult {
    let mut rng = gen::rng(suite_seed(config, 14));
    let mut run = SuiteRun::new("io_effective_classes");
    for _ in 0..config.cases {
        let u1 = rng.gen_range(1..=4);
        let u2 = rng.gen_range(1..=2);
        let open = gen::open_forward_record(&mut rng, u1, u2);
        let sigma = open.effective_structure().unwrap();
        let d_ports = gen::dirac(&mut rng, u2);
        let closed = open.interconnect(&d_ports).unwrap();
        let d_a = closed.effective_structure().unwrap();

        // Backward flavor with a random projection map.
        let d_state = gen::dirac(&mut rng, u1);
        let p = LinearMapSpec::new(gen::matrix(&mut rng, u2, u1));
        let open_b = IoStructure::open_backward(d_state, u2, p).unwrap();
        let sigma_b = open_b.effective_structure().unwrap();
        let ports_b = gen::dirac(&mut rng, u2);
        let closed_b = open_b.interconnect(&ports_b).unwrap();
        let d_b = closed_b.effective_structure().unwrap();

        let ok = sigma.class().is_coisotropic()
            && sigma_b.class().is_coisotropic()
            && d_a.class() == StructureClass::Dirac
            && d_a.dim() == u1
            && d_b.class() == StructureClass::Dirac
            && d_b.dim() == u1
            && sigma.span().contains(d_a.span()).unwrap()
            && sigma_b.span().contains(d_b.span()).unwrap();
        run.record(ok, 0.0);
    }
    run.finish()
}

/// Every element of an effective structure admits a port witness within the
/// witness tolerance; far-off pairs are rejected.
pub fn suite_io_membership(config: &CheckConfig) -> SuiteResult {
    let mut rng = gen::rng(suite_seed(config, 13));
    let mut run = SuiteRun::new("io_membership");
    for _ in 0..config.cases {
        let u1 = rng.gen_range(1..=4);
        let u2 = rng.gen_range(1..=2);
        let d = gen::dirac(&mut rng, u1);
        let ports = gen::dirac(&mut rng, u2);
        let g = LinearMapSpec::new(gen::matrix(&mut rng, u1, u2));
        let a = IoStructure::new(crate::iostruct::IoKind::Fio, d, ports, g).unwrap();
        let eff = a.effective_structure().unwrap();

        // A genuine member: random combination of the basis.
        let coeffs = DVector::from_fn(eff.dim(), |_, _| rng.gen_range(-1.0..1.0));
        let z = eff.span().basis() * coeffs;
        let u = z.rows(0, u1).into_owned();
        let alpha = z.rows(u1, u1).into_owned();
        let member = a.membership_witness(&u, &alpha);
        let residual = member
            .as_ref()
            .map(|w| w.residuals.iter().copied().fold(0.0, f64::max))
            .unwrap_or(f64::INFINITY);

        // A far-off pair: push the member away from the structure.
        let mut off = z.clone();
        let unit = {
            let raw = DVector::from_fn(2 * u1, |_, _| rng.gen_range(-1.0..1.0));
            let proj = eff.span().basis() * (eff.span().basis().transpose() * &raw);
            let residual_dir = raw - proj;
            if residual_dir.norm() < 1e-6 {
                None
            } else {
                Some(residual_dir.normalize())
            }
        };
        let rejected = match unit {
            Some(dir) => {
                off += dir;
                let u_off = off.rows(0, u1).into_owned();
                let a_off = off.rows(u1, u1).into_owned();
                a.membership_witness(&u_off, &a_off).is_none()
            }
            // Effective structure fills the whole space: nothing to reject.
            None => true,
        };
        run.record(member.is_some() && residual <= 1e-8 && rejected, residual);
    }
    run.finish()
}

/// Runs every suite and assembles the versioned report.
pub fn run_checks(config: &CheckConfig) -> CheckReport {
    let suites = vec![
        suite_subspace_algebra(config),
        suite_dirac_axioms(config),
        suite_functoriality(config),
        suite_classification_transfer(config),
        suite_composition_oracle(config),
        suite_isotropic_roundtrip(config),
        suite_coisotropic_roundtrip(config),
        suite_twist_duality(config),
        suite_tensor_product(config),
        suite_kernel_roundtrip(config),
        suite_range_form_roundtrip(config),
        suite_interconnection_equivalence(config),
        suite_io_effective_classes(config),
        suite_io_membership(config),
    ];
    let passed = suites.iter().all(|s| s.failures == 0);
    CheckReport {
        schema: "portdirac-check/v1".to_string(),
        seed: config.seed,
        cases: config.cases,
        suites,
        passed,
    }
}
