//! The five-step protocol: preparation, premeasurement, pointer readout,
//! feedback and erasure, on systems `B1 A M K B2`.
//!
//! The classical register `K` is carried as the branch index up to the
//! feedback step. Each branch holds `rho^{AM}_{2,k}` and, after feedback, a
//! block state over `A`, `M` and the `B1` registers. For erasure the block
//! state over `A M K` is reassembled densely and the `B2` registers are added
//! as Gibbs blocks; `B1` is not carried past feedback.

use std::fmt;

use crate::channels::{luders_instrument, nuclear_instrument, Instrument, KrausOperation, Povm};
use crate::error::{Error, Result};
use crate::operator::{DensityOperator, Matrix, Operator, SystemLabel, C64};
use crate::state::{Circuit, Gate, ProductState};
use crate::thermo::gibbs_state;

pub const A: &str = "A";
pub const M: &str = "M";
pub const K: &str = "K";
pub const B1_PREFIX: &str = "B1";
pub const B2_PREFIX: &str = "B2";

/// Tolerance for erasure classification.
pub const EPS_ERASE: f64 = 1e-8;

/// Labeled bath registers with a Hamiltonian split into terms. The terms
/// partition the registers; the bath starts in the product of their Gibbs
/// states.
#[derive(Clone, Debug, Default)]
pub struct Bath {
    pub registers: Vec<SystemLabel>,
    pub terms: Vec<Operator>,
}

impl Bath {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.registers.iter().map(|r| r.name.as_str()).collect()
    }

    /// Adds registers governed by a single Hamiltonian term.
    pub fn add(&mut self, h: Operator) {
        self.registers.extend(h.factors().iter().cloned());
        self.terms.push(h);
    }

    pub fn gibbs_blocks(&self, beta: f64) -> Result<Vec<Operator>> {
        self.terms
            .iter()
            .map(|t| Ok(gibbs_state(t, beta)?.into_operator()))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub enum PointerSpec {
    Luders { effects: Vec<Operator> },
    Nuclear { effects: Vec<Operator>, prepared: Vec<Operator> },
    Kraus { operations: Vec<Vec<Operator>> },
}

impl PointerSpec {
    pub fn n_outcomes(&self) -> usize {
        match self {
            PointerSpec::Luders { effects } | PointerSpec::Nuclear { effects, .. } => effects.len(),
            PointerSpec::Kraus { operations } => operations.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PointerSpec::Luders { .. } => "luders",
            PointerSpec::Nuclear { .. } => "nuclear",
            PointerSpec::Kraus { .. } => "kraus",
        }
    }

    pub fn instrument(&self) -> Result<Instrument> {
        match self {
            PointerSpec::Luders { effects } => luders_instrument(&Povm::new(effects.clone())?),
            PointerSpec::Nuclear { effects, prepared } => {
                let prepared = prepared
                    .iter()
                    .map(|p| DensityOperator::new(p.clone()))
                    .collect::<Result<Vec<_>>>()?;
                nuclear_instrument(&Povm::new(effects.clone())?, &prepared)
            }
            PointerSpec::Kraus { operations } => Instrument::new(
                operations
                    .iter()
                    .map(|k| KrausOperation::new(k.clone()))
                    .collect::<Result<Vec<_>>>()?,
            ),
        }
    }

    pub fn from_instrument(ins: &Instrument) -> Self {
        PointerSpec::Kraus {
            operations: ins.operations().iter().map(|o| o.kraus().to_vec()).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolSpec {
    pub name: String,
    pub seed: Option<u64>,
    pub beta: f64,
    /// `H^A_t` for `t = 0..=4`.
    pub h_a: Vec<Operator>,
    /// Memory plus register Hamiltonian on `[M, K]`.
    pub h_mk: Operator,
    pub bath1: Bath,
    pub bath2: Bath,
    pub rho0_a: Operator,
    pub rho0_m: Operator,
    /// Premeasurement on `[A, M]`.
    pub u: Operator,
    pub pointer: PointerSpec,
    /// One circuit per outcome on `A` and `B1` registers.
    pub feedback: Vec<Circuit>,
    /// Circuit on `M`, `K` and `B2` registers.
    pub erasure: Circuit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl ProtocolSpec {
    pub fn a_label(&self) -> SystemLabel {
        SystemLabel::new(A, self.rho0_a.dim())
    }

    pub fn m_label(&self) -> SystemLabel {
        SystemLabel::new(M, self.rho0_m.dim())
    }

    pub fn k_label(&self) -> SystemLabel {
        SystemLabel::new(K, self.pointer.n_outcomes())
    }

    pub fn n_outcomes(&self) -> usize {
        self.pointer.n_outcomes()
    }

    /// `|0><0|` on `K`.
    pub fn k_initial(&self) -> Operator {
        Operator::basis_projector(self.k_label(), 0).expect("K has dimension >= 1")
    }

    /// `rho^{MK}_0`.
    pub fn rho0_mk(&self) -> Result<Operator> {
        self.rho0_m.tensor(&self.k_initial())
    }

    /// Every invariant violation, with a location string.
    pub fn issues(&self) -> Vec<Issue> {
        let mut out = Vec::new();
        let mut push = |loc: &str, msg: String| {
            out.push(Issue {
                location: loc.to_string(),
                message: msg,
            })
        };
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            push("meta.beta", format!("must be positive and finite, got {}", self.beta));
        }
        let a = self.a_label();
        let m = self.m_label();
        let k = self.k_label();
        for (loc, op, lab) in [("states.rho0_A", &self.rho0_a, &a), ("states.rho0_M", &self.rho0_m, &m)] {
            if op.factors() != [lab.clone()] {
                push(loc, format!("must act on {} alone, acts on {:?}", lab.name, op.names()));
            } else if let Err(e) = DensityOperator::new(op.clone()) {
                push(loc, e.to_string());
            }
        }
        if self.h_a.len() != 5 {
            push("hamiltonians.A", format!("need 5 time slices, got {}", self.h_a.len()));
        }
        for (t, h) in self.h_a.iter().enumerate() {
            let loc = format!("hamiltonians.A@{t}");
            if h.factors() != [a.clone()] {
                push(&loc, "must act on A".into());
            } else if !h.is_hermitian() {
                push(&loc, format!("not Hermitian (residual {:.3e})", h.hermiticity_residual()));
            }
        }
        if self.h_a.len() == 5 {
            let scale = self.h_a[3].max_abs().max(self.h_a[4].max_abs()).max(1.0);
            match self.h_a[3].max_abs_diff(&self.h_a[4]) {
                Ok(d) if d <= 1e-12 * scale => {}
                _ => push("hamiltonians.A@4", "must equal A@3".into()),
            }
        }
        match self.h_mk.permuted(&[M, K]) {
            Ok(h) if h.factors() == [m.clone(), k.clone()] => {
                if !h.is_hermitian() {
                    push("hamiltonians.M+K", "not Hermitian".into());
                }
            }
            _ => push(
                "hamiltonians.M+K",
                format!("must act on M[{}] and K[{}]", m.dim, k.dim),
            ),
        }
        match self.u.permuted(&[A, M]) {
            Ok(u) if u.factors() == [a.clone(), m.clone()] => {
                if !u.is_unitary() {
                    push("unitaries.U", format!("not unitary (residual {:.3e})", u.unitarity_residual()));
                }
            }
            _ => push("unitaries.U", "must act on A and M".into()),
        }
        match self.pointer.instrument() {
            Ok(ins) => {
                if ins.factors() != [m.clone()] {
                    push("pointer", "must act on M".into());
                }
            }
            Err(e) => push("pointer", e.to_string()),
        }
        for (bath, prefix, loc) in [(&self.bath1, B1_PREFIX, "B1"), (&self.bath2, B2_PREFIX, "B2")] {
            let mut seen: Vec<&str> = Vec::new();
            for r in &bath.registers {
                if !r.name.starts_with(prefix) {
                    push(&format!("systems.{}", r.name), format!("bath register must start with {prefix}"));
                }
                if seen.contains(&r.name.as_str()) {
                    push(&format!("systems.{}", r.name), "duplicate register".into());
                }
                seen.push(&r.name);
            }
            let mut covered: Vec<&str> = Vec::new();
            for (i, t) in bath.terms.iter().enumerate() {
                let tloc = format!("hamiltonians.{loc}[{i}]");
                if !t.is_hermitian() {
                    push(&tloc, "not Hermitian".into());
                }
                for f in t.factors() {
                    if !bath.registers.contains(f) {
                        push(&tloc, format!("acts on {} which is not a {loc} register", f.name));
                    }
                    if covered.contains(&f.name.as_str()) {
                        push(&tloc, format!("register {} has two Hamiltonian terms", f.name));
                    }
                    covered.push(&f.name);
                }
            }
            for r in &bath.registers {
                if !covered.contains(&r.name.as_str()) {
                    push(&format!("systems.{}", r.name), "register has no Hamiltonian term".into());
                }
            }
        }
        if self.feedback.len() != self.n_outcomes() {
            push(
                "unitaries.F",
                format!("{} feedback entries for {} outcomes", self.feedback.len(), self.n_outcomes()),
            );
        }
        let mut fb_layout = self.bath1.registers.clone();
        fb_layout.push(a.clone());
        for (kk, c) in self.feedback.iter().enumerate() {
            check_circuit(c, &fb_layout, &format!("unitaries.F[{kk}]"), &mut out);
        }
        let mut er_layout = vec![m, k];
        er_layout.extend(self.bath2.registers.iter().cloned());
        check_circuit(&self.erasure, &er_layout, "unitaries.V", &mut out);
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Domain(
                issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "),
            ))
        }
    }

    /// All Hamiltonian terms at time `t` (A uses `H^A_t`).
    pub fn terms_at(&self, t: usize) -> Vec<Operator> {
        let mut v = self.bath1.terms.clone();
        v.push(self.h_a[t].clone());
        v.push(self.h_mk.clone());
        v.extend(self.bath2.terms.iter().cloned());
        v
    }
}

fn check_circuit(c: &Circuit, layout: &[SystemLabel], loc: &str, out: &mut Vec<Issue>) {
    for (i, g) in c.gates.iter().enumerate() {
        let gloc = format!("{loc}.gates[{i}]");
        let mut bad = |msg: String| {
            out.push(Issue {
                location: gloc.clone(),
                message: msg,
            })
        };
        match g {
            Gate::Unitary(u) => {
                for f in u.factors() {
                    if !layout.contains(f) {
                        bad(format!("acts on {f} outside its allowed systems"));
                    }
                }
                if !u.is_unitary() {
                    bad(format!("not unitary (residual {:.3e})", u.unitarity_residual()));
                }
            }
            Gate::Swap(x, y) => {
                let fx = layout.iter().find(|f| &f.name == x);
                let fy = layout.iter().find(|f| &f.name == y);
                match (fx, fy) {
                    (Some(fx), Some(fy)) if fx.dim == fy.dim && x != y => {}
                    (Some(_), Some(_)) => bad(format!("swap {x}<->{y} needs two distinct equal-dimension systems")),
                    _ => bad(format!("swap {x}<->{y} outside its allowed systems")),
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct BranchRecord {
    pub outcome: usize,
    pub p: f64,
    /// `rho^{AM}_{2,k}`; `None` for branches at or below `EPS_PROB`.
    pub rho_am_2: Option<Operator>,
    /// Post-feedback state over `A`, `M` and the `B1` registers.
    pub state_3: Option<ProductState>,
}

impl BranchRecord {
    pub fn defined(&self) -> bool {
        self.rho_am_2.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErasureClass {
    Perfect,
    Partial,
    Failed,
}

impl ErasureClass {
    pub fn succeeded(self) -> bool {
        !matches!(self, ErasureClass::Failed)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErasureClass::Perfect => "perfect",
            ErasureClass::Partial => "partial",
            ErasureClass::Failed => "failed",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ErasureReport {
    pub class: ErasureClass,
    /// `max|rho^{MK}_4 - rho^{MK}_0|`.
    pub reset_residual: f64,
    /// `max|rho^{AMK}_4 - rho^A_4 (x) rho^{MK}_0|`.
    pub decoupling_residual: f64,
}

#[derive(Clone, Debug)]
pub struct ProtocolTrace {
    pub beta: f64,
    pub probabilities: Vec<f64>,
    pub branches: Vec<BranchRecord>,
    /// Every system at `t = 0`.
    pub initial: ProductState,
    pub rho_am_1: Operator,
    /// `sum_k p_k rho^{AM}_{t,k} (x) |k><k|` on `[A, M, K]`.
    pub rho_amk_2: Operator,
    pub rho_amk_3: Operator,
    /// `A`, `M`, `K` and the `B2` registers at `t = 4`.
    pub final_state: ProductState,
    pub erasure: ErasureReport,
}

fn block_state(branches: &[(f64, Operator)], k: &SystemLabel) -> Result<Operator> {
    let factors = {
        let mut f = branches[0].1.factors().to_vec();
        f.push(k.clone());
        f
    };
    let mut acc = Operator::zeros(factors)?;
    for (i, (p, rho)) in branches.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        let kk = Operator::basis_projector(k.clone(), i)?;
        acc = acc.add(&rho.tensor(&kk)?.scale(*p))?;
    }
    Ok(acc)
}

pub fn run(spec: &ProtocolSpec) -> Result<ProtocolTrace> {
    spec.validate()?;
    let beta = spec.beta;
    let pointer = spec.pointer.instrument()?;
    let k_label = spec.k_label();
    let b1_gibbs = spec.bath1.gibbs_blocks(beta)?;
    let b2_gibbs = spec.bath2.gibbs_blocks(beta)?;

    let mut t0 = b1_gibbs.clone();
    t0.push(spec.rho0_a.clone());
    t0.push(spec.rho0_m.clone());
    t0.push(spec.k_initial());
    t0.extend(b2_gibbs.iter().cloned());
    let initial = ProductState::new(t0)?;

    let u = spec.u.permuted(&[A, M])?;
    let rho_am_0 = spec.rho0_a.tensor(&spec.rho0_m)?;
    let rho_am_1 = rho_am_0.conjugate_by(&u)?;

    let mut branches = Vec::with_capacity(pointer.n_outcomes());
    for (k, b) in pointer.apply(&rho_am_1)?.into_iter().enumerate() {
        let (rho_am_2, state_3) = match b.posterior {
            Some(post) => {
                let post = post.into_operator();
                let mut blocks = b1_gibbs.clone();
                blocks.push(post.clone());
                let mut s = ProductState::new(blocks)?;
                s.apply_circuit(&spec.feedback[k])?;
                (Some(post), Some(s))
            }
            None => (None, None),
        };
        branches.push(BranchRecord {
            outcome: k,
            p: b.weight,
            rho_am_2,
            state_3,
        });
    }
    let probabilities: Vec<f64> = branches.iter().map(|b| b.p).collect();

    let zero_am = Operator::zeros(vec![spec.a_label(), spec.m_label()])?;
    let mut at2 = Vec::with_capacity(branches.len());
    let mut at3 = Vec::with_capacity(branches.len());
    for b in &branches {
        match (&b.rho_am_2, &b.state_3) {
            (Some(r2), Some(s3)) => {
                at2.push((b.p, r2.clone()));
                at3.push((b.p, s3.marginal(&[A, M])?));
            }
            _ => {
                at2.push((0.0, zero_am.clone()));
                at3.push((0.0, zero_am.clone()));
            }
        }
    }
    let rho_amk_2 = block_state(&at2, &k_label)?;
    let rho_amk_3 = block_state(&at3, &k_label)?;

    let mut blocks = vec![rho_amk_3.clone()];
    blocks.extend(b2_gibbs);
    let mut final_state = ProductState::new(blocks)?;
    final_state.apply_circuit(&spec.erasure)?;

    let erasure = classify_erasure(&final_state, spec)?;
    Ok(ProtocolTrace {
        beta,
        probabilities,
        branches,
        initial,
        rho_am_1,
        rho_amk_2,
        rho_amk_3,
        final_state,
        erasure,
    })
}

pub fn classify_erasure(final_state: &ProductState, spec: &ProtocolSpec) -> Result<ErasureReport> {
    let mk0 = spec.rho0_mk()?;
    let mk4 = final_state.marginal(&[M, K])?;
    let reset_residual = mk4.max_abs_diff(&mk0)?;
    let amk4 = final_state.marginal(&[A, M, K])?;
    let a4 = final_state.marginal(&[A])?;
    let decoupling_residual = amk4.max_abs_diff(&a4.tensor(&mk0)?)?;
    let class = if reset_residual > EPS_ERASE {
        ErasureClass::Failed
    } else if decoupling_residual <= EPS_ERASE {
        ErasureClass::Perfect
    } else {
        ErasureClass::Partial
    };
    Ok(ErasureReport {
        class,
        reset_residual,
        decoupling_residual,
    })
}

/// Energy bookkeeping for the adiabatic steps.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct WorkLedger {
    pub w_ext_a: f64,
    pub w_in_mk: f64,
    pub w_tot: f64,
    pub de_a_02: f64,
    pub de_b1a_23: f64,
    pub de_mk_02: f64,
    pub de_mkb2_34: f64,
    /// `-(E_4 - E_0)` from total energies of the whole compound.
    pub w_tot_from_totals: f64,
}

impl WorkLedger {
    pub fn totals_residual(&self) -> f64 {
        (self.w_tot - self.w_tot_from_totals).abs()
    }
}

/// `sum_k p_k f(branch k)` over defined branches.
pub(crate) fn branch_average(
    trace: &ProtocolTrace,
    mut f: impl FnMut(&BranchRecord) -> Result<f64>,
) -> Result<f64> {
    let mut acc = 0.0;
    for b in trace.branches.iter().filter(|b| b.defined()) {
        acc += b.p * f(b)?;
    }
    Ok(acc)
}

pub fn work_ledger(trace: &ProtocolTrace, spec: &ProtocolSpec) -> Result<WorkLedger> {
    let e = |rho: &Operator, h: &Operator| -> Result<f64> {
        rho.partial_trace(&h.names())?.expectation(h)
    };
    let e_a0 = e(&spec.rho0_a, &spec.h_a[0])?;
    let e_a2 = e(&trace.rho_amk_2, &spec.h_a[2])?;
    let e_a3 = e(&trace.rho_amk_3, &spec.h_a[3])?;
    let e_mk0 = trace.initial.energy(std::slice::from_ref(&spec.h_mk))?;
    let e_mk2 = e(&trace.rho_amk_2, &spec.h_mk)?;
    let e_mk3 = e(&trace.rho_amk_3, &spec.h_mk)?;
    let e_mk4 = trace.final_state.energy(std::slice::from_ref(&spec.h_mk))?;
    let e_b1_2 = trace.initial.energy(&spec.bath1.terms)?;
    let e_b1_3 = branch_average(trace, |b| {
        b.state_3.as_ref().expect("defined").energy(&spec.bath1.terms)
    })?;
    let e_b2_3 = trace.initial.energy(&spec.bath2.terms)?;
    let e_b2_4 = trace.final_state.energy(&spec.bath2.terms)?;

    let de_a_02 = e_a2 - e_a0;
    let de_b1a_23 = (e_b1_3 + e_a3) - (e_b1_2 + e_a2);
    let de_mk_02 = e_mk2 - e_mk0;
    let de_mkb2_34 = (e_mk4 + e_b2_4) - (e_mk3 + e_b2_3);
    let w_ext_a = -de_a_02 - de_b1a_23;
    let w_in_mk = de_mk_02 + de_mkb2_34;
    let w_tot = w_ext_a - w_in_mk;

    let e_total_0 = trace.initial.energy(&spec.terms_at(0))?;
    let mut late = vec![spec.h_a[4].clone(), spec.h_mk.clone()];
    late.extend(spec.bath2.terms.iter().cloned());
    let e_total_4 = e_b1_3 + trace.final_state.energy(&late)?;
    Ok(WorkLedger {
        w_ext_a,
        w_in_mk,
        w_tot,
        de_a_02,
        de_b1a_23,
        de_mk_02,
        de_mkb2_34,
        w_tot_from_totals: -(e_total_4 - e_total_0),
    })
}

/// Hermitian matrix helper: `diag(values)` on a labeled factor.
pub fn diag_on(name: &str, values: &[f64]) -> Operator {
    Operator::diagonal(vec![SystemLabel::new(name, values.len())], values).expect("valid diagonal")
}

/// Zero Hamiltonians on `A` for all five time slices.
pub fn flat_h_a(da: usize) -> Vec<Operator> {
    (0..5)
        .map(|_| Operator::zeros(vec![SystemLabel::new(A, da)]).expect("valid"))
        .collect()
}

pub fn zero_h_mk(dm: usize, dk: usize) -> Operator {
    Operator::zeros(vec![SystemLabel::new(M, dm), SystemLabel::new(K, dk)]).expect("valid")
}

/// Permutation unitary `|i> -> |perm[i]>` on one factor.
pub fn permutation_operator(label: SystemLabel, perm: &[usize]) -> Result<Operator> {
    let d = label.dim;
    let mut m = Matrix::zeros(d, d);
    for (i, &j) in perm.iter().enumerate() {
        m[(j, i)] = C64::new(1.0, 0.0);
    }
    Operator::new(vec![label], m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{c, real_matrix};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn q(n: &str) -> SystemLabel {
        SystemLabel::new(n, 2)
    }

    fn cnot_am() -> Operator {
        let m = real_matrix(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        Operator::new(vec![q(A), q(M)], m).unwrap()
    }

    fn x_on(name: &str) -> Operator {
        Operator::new(vec![q(name)], real_matrix(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap()
    }

    fn null_protocol() -> ProtocolSpec {
        let mut b1 = Bath::empty();
        b1.add(diag_on("B1.0", &[0.0, 0.4]));
        let mut b2 = Bath::empty();
        b2.add(diag_on("B2.0", &[0.0, 0.9]));
        ProtocolSpec {
            name: "null".into(),
            seed: None,
            beta: 1.3,
            h_a: (0..5).map(|_| diag_on(A, &[0.0, 0.7])).collect(),
            h_mk: Operator::diagonal(vec![q(M), SystemLabel::new(K, 1)], &[0.0, 0.5]).unwrap(),
            bath1: b1,
            bath2: b2,
            rho0_a: diag_on(A, &[0.6, 0.4]),
            rho0_m: diag_on(M, &[0.8, 0.2]),
            u: Operator::identity(vec![q(A), q(M)]).unwrap(),
            pointer: PointerSpec::Kraus {
                operations: vec![vec![Operator::identity(vec![q(M)]).unwrap()]],
            },
            feedback: vec![Circuit::identity()],
            erasure: Circuit::identity(),
        }
    }

    fn cnot_protocol(feedback_flip: bool) -> ProtocolSpec {
        let mut s = null_protocol();
        s.rho0_a = Operator::pure(vec![q(A)], &[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]).unwrap();
        s.rho0_m = diag_on(M, &[1.0, 0.0]);
        s.u = cnot_am();
        s.h_mk = zero_h_mk(2, 2);
        s.pointer = PointerSpec::Luders {
            effects: vec![diag_on(M, &[1.0, 0.0]), diag_on(M, &[0.0, 1.0])],
        };
        s.feedback = if feedback_flip {
            vec![Circuit::identity(), Circuit::single(x_on(A))]
        } else {
            vec![Circuit::identity(), Circuit::identity()]
        };
        s
    }

    #[test]
    fn null_protocol_is_inert() {
        let spec = null_protocol();
        let tr = run(&spec).unwrap();
        let w = work_ledger(&tr, &spec).unwrap();
        assert!(w.w_ext_a.abs() < 1e-15 && w.w_in_mk.abs() < 1e-15 && w.w_tot.abs() < 1e-15);
        assert!(w.w_tot_from_totals.abs() < 1e-14);
        let amk0 = spec.rho0_a.tensor(&spec.rho0_mk().unwrap()).unwrap();
        let amk4 = tr.final_state.marginal(&[A, M, K]).unwrap();
        assert!(amk4.max_abs_diff(&amk0).unwrap() < 1e-15);
        assert_eq!(tr.erasure.class, ErasureClass::Perfect);
    }

    #[test]
    fn cnot_readout_branches() {
        let spec = cnot_protocol(false);
        let tr = run(&spec).unwrap();
        for k in 0..2 {
            assert!((tr.probabilities[k] - 0.5).abs() < 1e-15);
            let a = tr.branches[k].rho_am_2.as_ref().unwrap().partial_trace(&[A]).unwrap();
            let want = Operator::basis_projector(q(A), k).unwrap();
            assert!(a.max_abs_diff(&want).unwrap() < 1e-15);
        }
    }

    #[test]
    fn conditional_flip_resets_a() {
        let spec = cnot_protocol(true);
        let tr = run(&spec).unwrap();
        let zero = Operator::basis_projector(q(A), 0).unwrap();
        for b in &tr.branches {
            let a = b.state_3.as_ref().unwrap().marginal(&[A]).unwrap();
            assert!(a.max_abs_diff(&zero).unwrap() < 1e-15);
        }
        // V = identity leaves MK = diag(1/2 |00>, 1/2 |11>) != rho_0
        assert_eq!(tr.erasure.class, ErasureClass::Failed);
    }

    #[test]
    fn measurement_only_ledger() {
        let mut spec = cnot_protocol(false);
        spec.h_mk = Operator::diagonal(vec![q(M), q(K)], &[0.0, 0.3, 0.5, 1.1]).unwrap();
        let tr = run(&spec).unwrap();
        let w = work_ledger(&tr, &spec).unwrap();
        assert!((w.w_in_mk - w.de_mk_02).abs() < 1e-15);
        assert!((w.w_tot - w.w_tot_from_totals).abs() < 1e-12);
        // E^MK goes from 0 to (0 + 1.1)/2
        assert!((w.de_mk_02 - 0.55).abs() < 1e-14);
    }

    #[test]
    fn swap_into_reset_register_erases() {
        let mut spec = cnot_protocol(true);
        let tau = crate::thermo::thermal_hamiltonian(
            &Operator::diagonal(vec![q("B2.r.M"), q("B2.r.K")], &[1.0 - 3e-11, 1e-11, 1e-11, 1e-11]).unwrap(),
            spec.beta,
        )
        .unwrap();
        spec.bath2 = Bath::empty();
        spec.bath2.add(tau);
        spec.erasure = Circuit::identity()
            .then(Gate::Swap(M.into(), "B2.r.M".into()))
            .then(Gate::Swap(K.into(), "B2.r.K".into()));
        let tr = run(&spec).unwrap();
        assert_eq!(tr.erasure.class, ErasureClass::Perfect);
    }

    #[test]
    fn validation_lists_locations() {
        let mut spec = null_protocol();
        spec.u = Operator::diagonal(vec![q(A), q(M)], &[1.0, 1.0, 1.0, 2.0]).unwrap();
        spec.h_a[4] = diag_on(A, &[0.0, 0.1]);
        spec.feedback.push(Circuit::identity());
        let issues = spec.issues();
        let locs: Vec<&str> = issues.iter().map(|i| i.location.as_str()).collect();
        assert!(locs.contains(&"unitaries.U"));
        assert!(locs.contains(&"hamiltonians.A@4"));
        assert!(locs.contains(&"unitaries.F"));
        assert!(run(&spec).is_err());
    }
}
