//! Information ledger, exact work identities, bounds and second-law
//! verdicts.
//!
//! Right-hand sides are built from entropies, mutual informations and
//! divergences of marginals, never from the energy bookkeeping in
//! [`crate::protocol::work_ledger`], so the equality checks compare two
//! independent code paths.

use serde::Serialize;

use crate::channels::Instrument;
use crate::error::Result;
use crate::operator::{Operator, SystemLabel};
use crate::protocol::{branch_average, ProtocolSpec, ProtocolTrace, WorkLedger, A, K, M};
use crate::qinfo::{conditional_mutual_information, mutual_information, shannon_entropy, von_neumann_entropy};
use crate::thermo::noneq_free_energy;

/// Inequality verdict tolerance, scaled by `max(1, |magnitude|)`.
pub const VERDICT_TOL: f64 = 1e-9;
/// Saturation detection tolerance on the dropped terms.
pub const SATURATION_TOL: f64 = 1e-7;
/// Relative tolerance for the exact work identities.
pub const IDENTITY_TOL: f64 = 1e-8;

fn scale(x: f64) -> f64 {
    x.abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfoLedger {
    pub i_go: f64,
    pub j_go: f64,
    /// `I(A:K)` at `t = 3`.
    pub holevo_ak: f64,
    /// `I(A:M|K)` at `t = 2`.
    pub cmi_am_k: f64,
    pub s_irr_b1: f64,
    pub s_irr_b2: f64,
    pub ds_amk_02: f64,
    pub ds_mk_02: f64,
    /// `I(A:MK)` at `t = 4`.
    pub i_a_mk_4: f64,
    pub h_outcomes: f64,
    pub s_a_0: f64,
    pub s_m_0: f64,
    pub df_a_04: f64,
    pub df_amk_04: f64,
}

pub fn info_ledger(trace: &ProtocolTrace, spec: &ProtocolSpec) -> Result<InfoLedger> {
    let beta = spec.beta;
    let s_a_0 = von_neumann_entropy(&spec.rho0_a);
    let s_m_0 = von_neumann_entropy(&spec.rho0_m);
    let post_a = branch_average(trace, |b| {
        Ok(von_neumann_entropy(&b.rho_am_2.as_ref().expect("defined").partial_trace(&[A])?))
    })?;
    let post_m = branch_average(trace, |b| {
        Ok(von_neumann_entropy(&b.rho_am_2.as_ref().expect("defined").partial_trace(&[M])?))
    })?;
    let holevo_ak = mutual_information(&trace.rho_amk_3, &[A], &[K])?;
    let cmi_am_k = conditional_mutual_information(&trace.rho_amk_2, &[A], &[M], &[K])?;

    let b1: Vec<&str> = spec.bath1.names();
    let s_irr_b1 = if b1.is_empty() {
        0.0
    } else {
        branch_average(trace, |b| {
            let s = b.state_3.as_ref().expect("defined");
            Ok(s.mutual_information(&[A], &b1)? + s.relative_entropy_to_gibbs(&spec.bath1.terms, beta)?)
        })?
    };
    let b2: Vec<&str> = spec.bath2.names();
    let fin = &trace.final_state;
    let s_irr_b2 = if b2.is_empty() {
        0.0
    } else {
        fin.mutual_information(&[M, K], &b2)? + fin.relative_entropy_to_gibbs(&spec.bath2.terms, beta)?
    };

    let s_amk_0 = s_a_0 + s_m_0;
    let ds_amk_02 = von_neumann_entropy(&trace.rho_amk_2) - s_amk_0;
    let ds_mk_02 = von_neumann_entropy(&trace.rho_amk_2.partial_trace(&[M, K])?) - s_m_0;
    let i_a_mk_4 = fin.mutual_information(&[A], &[M, K])?;

    let f_a_0 = noneq_free_energy(&spec.rho0_a, &spec.h_a[0], beta)?;
    let rho_a_4 = fin.marginal(&[A])?;
    let f_a_4 = noneq_free_energy(&rho_a_4, &spec.h_a[4], beta)?;
    let e_mk_0 = spec.rho0_mk()?.expectation(&spec.h_mk)?;
    let e_a_0 = spec.rho0_a.expectation(&spec.h_a[0])?;
    let f_amk_0 = e_a_0 + e_mk_0 - s_amk_0 / beta;
    let e_a_4 = rho_a_4.expectation(&spec.h_a[4])?;
    let e_mk_4 = fin.energy(std::slice::from_ref(&spec.h_mk))?;
    let f_amk_4 = e_a_4 + e_mk_4 - fin.entropy(&[A, M, K])? / beta;

    Ok(InfoLedger {
        i_go: s_a_0 - post_a,
        j_go: s_m_0 - post_m,
        holevo_ak,
        cmi_am_k,
        s_irr_b1,
        s_irr_b2,
        ds_amk_02,
        ds_mk_02,
        i_a_mk_4,
        h_outcomes: shannon_entropy(&trace.probabilities),
        s_a_0,
        s_m_0,
        df_a_04: f_a_4 - f_a_0,
        df_amk_04: f_amk_4 - f_amk_0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    NotApplicable,
}

impl Outcome {
    fn of(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Outcome::Pass
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::NotApplicable => "n/a",
        }
    }
}

/// One law checked on one protocol. For equalities `margin` is the
/// absolute residual `|lhs - rhs|`; for inequalities `lhs <= rhs` it is the
/// slack `rhs - lhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LawVerdict {
    pub law: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saturated: Option<bool>,
    /// Residual of `slack == dropped terms / beta` for the bounds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition_residual: Option<f64>,
}

impl LawVerdict {
    fn equality(law: &'static str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let margin = (lhs - rhs).abs();
        Self {
            law,
            lhs,
            rhs,
            margin,
            tolerance,
            outcome: Outcome::of(margin <= tolerance),
            saturated: None,
            decomposition_residual: None,
        }
    }

    /// `lhs <= rhs` within `tolerance`.
    fn at_most(law: &'static str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let margin = rhs - lhs;
        Self {
            law,
            lhs,
            rhs,
            margin,
            tolerance,
            outcome: Outcome::of(margin >= -tolerance),
            saturated: None,
            decomposition_residual: None,
        }
    }

    fn not_applicable(mut self) -> Self {
        self.outcome = Outcome::NotApplicable;
        self
    }

    pub fn passed(&self) -> bool {
        self.outcome.passed()
    }
}

/// Extracted and injected work identities. The injected one assumes the
/// memory and register were reset; it is marked not applicable otherwise.
pub fn verify_work_identities(
    trace: &ProtocolTrace,
    spec: &ProtocolSpec,
    work: &WorkLedger,
    info: &InfoLedger,
) -> (LawVerdict, LawVerdict) {
    let b = 1.0 / spec.beta;
    let ext_rhs = -info.df_a_04 + b * (info.i_go - info.holevo_ak - info.s_irr_b1);
    let ext_id = LawVerdict::equality("extracted_work_identity", work.w_ext_a, ext_rhs, IDENTITY_TOL * scale(work.w_ext_a));
    let in_rhs = b * (info.ds_amk_02 + info.i_go + info.cmi_am_k + info.s_irr_b2);
    let mut in_id = LawVerdict::equality("injected_work_identity", work.w_in_mk, in_rhs, IDENTITY_TOL * scale(work.w_in_mk));
    if !trace.erasure.class.succeeded() {
        in_id = in_id.not_applicable();
    }
    (ext_id, in_id)
}

/// Upper bound on extracted work and lower bound on injected work, with
/// saturation flags and the exact slack decomposition.
pub fn verify_work_bounds(
    trace: &ProtocolTrace,
    spec: &ProtocolSpec,
    work: &WorkLedger,
    info: &InfoLedger,
) -> (LawVerdict, LawVerdict) {
    let b = 1.0 / spec.beta;
    let ext_bound = -info.df_a_04 + b * info.i_go;
    let mut ext_bd = LawVerdict::at_most("extracted_work_bound", work.w_ext_a, ext_bound, VERDICT_TOL * scale(ext_bound));
    ext_bd.saturated = Some(info.holevo_ak <= SATURATION_TOL && info.s_irr_b1 <= SATURATION_TOL);
    ext_bd.decomposition_residual = Some((ext_bd.margin - b * (info.holevo_ak + info.s_irr_b1)).abs());

    let in_bound = b * (info.ds_amk_02 + info.i_go);
    // W_in >= bound  <=>  -W_in <= -bound
    let mut in_bd = LawVerdict::at_most("injected_work_bound", -work.w_in_mk, -in_bound, VERDICT_TOL * scale(in_bound));
    in_bd.lhs = work.w_in_mk;
    in_bd.rhs = in_bound;
    in_bd.saturated = Some(info.cmi_am_k <= SATURATION_TOL && info.s_irr_b2 <= SATURATION_TOL);
    in_bd.decomposition_residual = Some((in_bd.margin - b * (info.cmi_am_k + info.s_irr_b2)).abs());
    if !trace.erasure.class.succeeded() {
        in_bd = in_bd.not_applicable();
    }
    (ext_bd, in_bd)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SecondLaws {
    /// `W_tot <= -dF^{AMK}_{0->4}`.
    pub overall: LawVerdict,
    /// `W_tot <= -dF^A_{0->4}`.
    pub information: LawVerdict,
    /// Entropy restatement of `overall`, valid once erasure succeeded.
    pub overall_entropy_form: LawVerdict,
    pub information_entropy_form: LawVerdict,
    /// `|(-dF^{AMK}) - (-dF^A - I(A:MK)_4 / beta)|`.
    pub free_energy_chain: LawVerdict,
    /// Overall pass implies information pass. Undefined when the erasure
    /// failed to restore the memory and register.
    pub implication_holds: Option<bool>,
    /// Erasure perfect within tolerance: both verdicts must then agree.
    pub perfect_erasure_agreement: Option<bool>,
}

pub fn check_second_laws(
    trace: &ProtocolTrace,
    spec: &ProtocolSpec,
    work: &WorkLedger,
    info: &InfoLedger,
) -> SecondLaws {
    let beta = spec.beta;
    let b = 1.0 / beta;
    let rhs_o = -info.df_amk_04;
    let overall = LawVerdict::at_most("overall_second_law", work.w_tot, rhs_o, VERDICT_TOL * scale(rhs_o));
    let rhs_i = -info.df_a_04;
    let information = LawVerdict::at_most("information_second_law", work.w_tot, rhs_i, VERDICT_TOL * scale(rhs_i));

    let dropped = info.holevo_ak + info.cmi_am_k + info.s_irr_b1 + info.s_irr_b2;
    // dS >= I(A:MK)_4 - dropped, and dS >= -dropped, written as -dS <= ...
    let tol_o = beta * overall.tolerance;
    let tol_i = beta * information.tolerance;
    let mut overall_entropy_form = LawVerdict::at_most(
        "overall_second_law_entropy_form",
        -info.ds_amk_02,
        dropped - info.i_a_mk_4,
        tol_o,
    );
    let mut information_entropy_form =
        LawVerdict::at_most("information_second_law_entropy_form", -info.ds_amk_02, dropped, tol_i);
    let mut free_energy_chain = LawVerdict::equality(
        "free_energy_chain",
        -info.df_amk_04,
        -info.df_a_04 - b * info.i_a_mk_4,
        VERDICT_TOL * scale(info.df_amk_04),
    );
    let succeeded = trace.erasure.class.succeeded();
    if !succeeded {
        overall_entropy_form = overall_entropy_form.not_applicable();
        information_entropy_form = information_entropy_form.not_applicable();
        free_energy_chain = free_energy_chain.not_applicable();
    }
    let implication_holds = succeeded.then(|| !overall.passed() || information.passed());
    let perfect = succeeded && trace.erasure.decoupling_residual <= crate::protocol::EPS_ERASE;
    let perfect_erasure_agreement = perfect.then(|| overall.outcome == information.outcome);
    SecondLaws {
        overall,
        information,
        overall_entropy_form,
        information_entropy_form,
        free_energy_chain,
        implication_holds,
        perfect_erasure_agreement,
    }
}

/// `I(A:M|K)_2 = -I_GO + dS^{MK}_{0->2} - dS^{AMK}_{0->2}`; returns the
/// absolute residual.
pub fn cmi_go_identity(info: &InfoLedger) -> f64 {
    (info.cmi_am_k - (-info.i_go + info.ds_mk_02 - info.ds_amk_02)).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementCompatibility {
    /// `dS^{AMK}_{0->2} >= -I(A:M|K)_2`.
    pub entropy_form: LawVerdict,
    /// `H(p) >= I_GO + J_GO`.
    pub shannon_form: LawVerdict,
    pub identity_residual: f64,
    pub forms_agree: bool,
    pub i_go: f64,
    pub j_go: f64,
    pub h_outcomes: f64,
    pub ds_amk_02: f64,
    pub cmi_am_k: f64,
}

impl MeasurementCompatibility {
    pub fn passed(&self) -> bool {
        self.entropy_form.passed()
    }
}

/// Evaluates the measurement segment `t = 0 -> 2` alone.
pub fn measurement_compatibility(
    rho0_a: &Operator,
    rho0_m: &Operator,
    u: &Operator,
    pointer: &Instrument,
) -> Result<MeasurementCompatibility> {
    let rho_am_1 = rho0_a.tensor(rho0_m)?.conjugate_by(&u.permuted(&[A, M])?)?;
    let k = SystemLabel::new(K, pointer.n_outcomes());
    let mut p = Vec::new();
    let mut post_a = 0.0;
    let mut post_m = 0.0;
    let mut rho_amk_2 = Operator::zeros(vec![rho0_a.factors()[0].clone(), rho0_m.factors()[0].clone(), k.clone()])?;
    for (i, b) in pointer.apply(&rho_am_1)?.into_iter().enumerate() {
        p.push(b.weight);
        if let Some(post) = b.posterior {
            let post = post.into_operator();
            post_a += b.weight * von_neumann_entropy(&post.partial_trace(&[A])?);
            post_m += b.weight * von_neumann_entropy(&post.partial_trace(&[M])?);
            let kk = Operator::basis_projector(k.clone(), i)?;
            rho_amk_2 = rho_amk_2.add(&post.tensor(&kk)?.scale(b.weight))?;
        }
    }
    let s_a_0 = von_neumann_entropy(rho0_a);
    let s_m_0 = von_neumann_entropy(rho0_m);
    let i_go = s_a_0 - post_a;
    let j_go = s_m_0 - post_m;
    let h = shannon_entropy(&p);
    let ds_amk_02 = von_neumann_entropy(&rho_amk_2) - s_a_0 - s_m_0;
    let ds_mk_02 = von_neumann_entropy(&rho_amk_2.partial_trace(&[M, K])?) - s_m_0;
    let cmi = conditional_mutual_information(&rho_amk_2, &[A], &[M], &[K])?;
    let entropy_form = LawVerdict::at_most("measurement_entropy_form", -ds_amk_02, cmi, VERDICT_TOL * scale(ds_amk_02));
    let shannon_form = LawVerdict::at_most("measurement_shannon_form", i_go + j_go, h, VERDICT_TOL * scale(h));
    let identity_residual = (cmi - (-i_go + ds_mk_02 - ds_amk_02)).abs();
    Ok(MeasurementCompatibility {
        forms_agree: entropy_form.outcome == shannon_form.outcome,
        entropy_form,
        shannon_form,
        identity_residual,
        i_go,
        j_go,
        h_outcomes: h,
        ds_amk_02,
        cmi_am_k: cmi,
    })
}

/// Everything computed for one protocol run.
#[derive(Clone, Debug, Serialize)]
pub struct LedgerReport {
    pub work: WorkLedger,
    pub info: InfoLedger,
    pub extracted_work_identity: LawVerdict,
    pub injected_work_identity: LawVerdict,
    pub extracted_work_bound: LawVerdict,
    pub injected_work_bound: LawVerdict,
    pub second_laws: SecondLaws,
    pub measurement: MeasurementCompatibility,
    pub cmi_go_identity_residual: f64,
    pub erasure_class: &'static str,
    pub erasure_reset_residual: f64,
    pub erasure_decoupling_residual: f64,
    pub probabilities: Vec<f64>,
}

pub fn evaluate(spec: &ProtocolSpec) -> Result<LedgerReport> {
    let trace = crate::protocol::run(spec)?;
    evaluate_trace(&trace, spec)
}

pub fn evaluate_trace(trace: &ProtocolTrace, spec: &ProtocolSpec) -> Result<LedgerReport> {
    let work = crate::protocol::work_ledger(trace, spec)?;
    let info = info_ledger(trace, spec)?;
    let (ext_id, in_id) = verify_work_identities(trace, spec, &work, &info);
    let (ext_bd, in_bd) = verify_work_bounds(trace, spec, &work, &info);
    let second_laws = check_second_laws(trace, spec, &work, &info);
    let measurement = measurement_compatibility(&spec.rho0_a, &spec.rho0_m, &spec.u, &spec.pointer.instrument()?)?;
    Ok(LedgerReport {
        work: work.clone(),
        cmi_go_identity_residual: cmi_go_identity(&info),
        info,
        extracted_work_identity: ext_id,
        injected_work_identity: in_id,
        extracted_work_bound: ext_bd,
        injected_work_bound: in_bd,
        second_laws,
        measurement,
        erasure_class: trace.erasure.class.as_str(),
        erasure_reset_residual: trace.erasure.reset_residual,
        erasure_decoupling_residual: trace.erasure.decoupling_residual,
        probabilities: trace.probabilities.clone(),
    })
}
