//! Named protocol constructions, the staged bath builder and random protocol
//! sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{
    induced_system_instrument, is_efficient, luders_instrument, postprocess, povm_of_instrument,
    random_instrument, random_mixed_unitary_channel, random_partial_reset_channel, Instrument, MeasurementScheme, RANK_TOL,
};
use crate::error::{composition, domain, Error, Result};
use crate::operator::{hermitian_eig, hermitian_eig_matrix, Matrix, Operator, SystemLabel, C64};
use crate::protocol::{
    diag_on, flat_h_a, permutation_operator, zero_h_mk, Bath, PointerSpec, ProtocolSpec, A, K, M,
};
use crate::random::{haar_unitary, random_density_matrix, random_hermitian, rng_from_seed, DemonRng};
use crate::state::{Circuit, Gate};
use crate::thermo::thermal_hamiltonian;

/// Smallest eigenvalue given to bath register states, so that their
/// Hamiltonians stay finite. Below the entropy support cutoff, so the floor
/// does not show up in entropies.
pub const REGISTER_FLOOR: f64 = 1e-14;

/// `(1 - eps) tau + eps 1/d` with `eps = d * REGISTER_FLOOR`, applied only
/// when `tau` has an eigenvalue below the floor.
pub fn regularize(tau: &Operator) -> Result<Operator> {
    let eig = hermitian_eig(tau)?;
    if eig.values[0] >= REGISTER_FLOOR {
        return Ok(tau.clone());
    }
    let d = tau.dim() as f64;
    let eps = d * REGISTER_FLOOR;
    let id = Operator::identity(tau.factors().to_vec())?;
    tau.scale(1.0 - eps).add(&id.scale(eps / d))
}

/// Points `t_j = j / n`, `j = 1..=n`, on the Fisher-Rao geodesic between
/// two probability vectors (ordered alike).
pub fn geodesic_spectra(p: &[f64], q: &[f64], n: usize) -> Vec<Vec<f64>> {
    let sp: Vec<f64> = p.iter().map(|x| x.max(0.0).sqrt()).collect();
    let sq: Vec<f64> = q.iter().map(|x| x.max(0.0).sqrt()).collect();
    let cos: f64 = sp.iter().zip(&sq).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0);
    let theta = cos.acos();
    (1..=n)
        .map(|j| {
            let t = j as f64 / n as f64;
            let v: Vec<f64> = if theta < 1e-12 {
                q.to_vec()
            } else {
                let (a, b) = (((1.0 - t) * theta).sin(), (t * theta).sin());
                sp.iter()
                    .zip(&sq)
                    .map(|(x, y)| {
                        let r = (a * x + b * y) / theta.sin();
                        r * r
                    })
                    .collect()
            };
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
        .collect()
}

/// A circuit that drives `system` from `current` towards `target` through
/// `n` fresh bath registers, plus the Hamiltonian terms of those registers.
///
/// The first gate rotates the eigenbasis of `current` (descending order)
/// onto that of `target`; stage `j` then swaps the system with register `j`,
/// which starts thermal in the state `tau_j` on the spectral geodesic.
/// Register labels are `{prefix}.{j}.{system label}`.
pub fn staged_thermalization(
    current: &Operator,
    target: &Operator,
    n: usize,
    prefix: &str,
    beta: f64,
) -> Result<(Circuit, Vec<Operator>)> {
    if n == 0 {
        return composition("staged thermalization needs at least one stage");
    }
    let target = target.permuted(&current.names())?;
    let d = current.dim();
    let ec = hermitian_eig(current)?;
    let et = hermitian_eig(&target)?;
    // descending order
    let rev = |m: &Matrix| Matrix::from_fn(d, d, |i, j| m[(i, d - 1 - j)]);
    let vc = rev(&ec.vectors);
    let vt = rev(&et.vectors);
    let p: Vec<f64> = ec.values.iter().rev().copied().collect();
    let q: Vec<f64> = et.values.iter().rev().copied().collect();
    let rot = Operator::new(current.factors().to_vec(), &vt * vc.adjoint())?;

    let mut circuit = Circuit::identity().then(Gate::Unitary(rot));
    let mut terms = Vec::with_capacity(n);
    for (j, spec) in geodesic_spectra(&p, &q, n).into_iter().enumerate() {
        let mut diag = Matrix::zeros(d, d);
        for (i, x) in spec.iter().enumerate() {
            diag[(i, i)] = C64::new(*x, 0.0);
        }
        let tau = Operator::new(current.factors().to_vec(), &vt * diag * vt.adjoint())?;
        let tau = regularize(&tau)?;
        let labels: Vec<SystemLabel> = current
            .factors()
            .iter()
            .map(|f| SystemLabel::new(format!("{prefix}.{}.{}", j + 1, f.name), f.dim))
            .collect();
        terms.push(thermal_hamiltonian(&tau, beta)?.relabeled(labels.clone())?);
        for (f, l) in current.factors().iter().zip(&labels) {
            circuit = circuit.then(Gate::Swap(f.name.clone(), l.name.clone()));
        }
    }
    Ok((circuit, terms))
}

fn append(mut a: Circuit, b: Circuit) -> Circuit {
    a.gates.extend(b.gates);
    a
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub beta: f64,
    /// Erasure (and feedback) stages.
    pub stages: usize,
    /// Number of sectors of the system observable.
    pub sectors: usize,
    /// Rank of the initial memory state.
    pub memory_rank: usize,
    /// Memory dimension; defaults to `sectors * memory_rank`.
    pub memory_dim: Option<usize>,
    /// Outcome whose effect supports the initial system state.
    pub outcome: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            stages: 8,
            sectors: 1,
            memory_rank: 2,
            memory_dim: None,
            outcome: 0,
            seed: 0,
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return domain(format!("beta must be positive, got {beta}"));
    }
    Ok(())
}

/// Measure-and-prepare counterexample.
///
/// The system observable has `sectors` projective sectors (a qubit with one
/// trivial sector when `sectors == 1`). The memory starts maximally mixed
/// on its first sector of size `memory_rank`; a controlled shift copies the
/// sector index into the memory and a sector PVM reads it out. The pointer
/// is then replaced by the measure-and-prepare instrument with the same POVM
/// and constant output `|0>` on `M`. The system starts maximally mixed on
/// the range of the chosen effect, so a single outcome occurs. A spare
/// memory subspace, if any, becomes an extra outcome with a null effect.
pub fn build_counterexample(cfg: &ScenarioConfig) -> Result<ProtocolSpec> {
    check_beta(cfg.beta)?;
    let n = cfg.sectors;
    let r = cfg.memory_rank;
    if n == 0 || r == 0 {
        return composition("counterexample needs at least one sector and memory rank >= 1");
    }
    if r == 1 {
        return Err(Error::DegenerateScenario(
            "pure memory: S(M) = 0 and the violation vanishes".into(),
        ));
    }
    let dm = cfg.memory_dim.unwrap_or(n * r);
    if dm < n * r {
        return composition(format!("memory dimension {dm} below sectors * rank = {}", n * r));
    }
    if cfg.outcome >= n {
        return composition(format!("outcome {} outside the {n} sectors", cfg.outcome));
    }
    let a_block = if n == 1 { 2 } else { 1 };
    let da = n * a_block;
    let null = dm > n * r;
    let n_out = n + usize::from(null);
    let a = SystemLabel::new(A, da);
    let m = SystemLabel::new(M, dm);

    // |j, m> -> |j, m + s(j) r mod dm>
    let mut u = Matrix::zeros(da * dm, da * dm);
    for ai in 0..da {
        let shift = (ai / a_block) * r;
        for mi in 0..dm {
            u[(ai * dm + (mi + shift) % dm, ai * dm + mi)] = C64::new(1.0, 0.0);
        }
    }
    let u = Operator::new(vec![a.clone(), m.clone()], u)?;

    let mut effects = Vec::with_capacity(n_out);
    for j in 0..n {
        let mut diag = vec![0.0; dm];
        diag[j * r..(j + 1) * r].iter_mut().for_each(|x| *x = 1.0);
        effects.push(diag_on(M, &diag));
    }
    if null {
        let mut diag = vec![0.0; dm];
        diag[n * r..].iter_mut().for_each(|x| *x = 1.0);
        effects.push(diag_on(M, &diag));
    }
    let mut mem = vec![0.0; dm];
    mem[..r].iter_mut().for_each(|x| *x = 1.0 / r as f64);
    let mut a0 = vec![0.0; da];
    let h = cfg.outcome;
    a0[h * a_block..(h + 1) * a_block]
        .iter_mut()
        .for_each(|x| *x = 1.0 / a_block as f64);
    let prepared = Operator::basis_projector(m.clone(), 0)?;

    Ok(ProtocolSpec {
        name: "counterexample".into(),
        seed: None,
        beta: cfg.beta,
        h_a: flat_h_a(da),
        h_mk: zero_h_mk(dm, n_out),
        bath1: Bath::empty(),
        bath2: Bath::empty(),
        rho0_a: diag_on(A, &a0),
        rho0_m: diag_on(M, &mem),
        u,
        pointer: PointerSpec::Nuclear {
            prepared: vec![prepared; n_out],
            effects,
        },
        feedback: vec![Circuit::identity(); n_out],
        // a bare register relabel: leaves M untouched, so erasure fails
        erasure: Circuit::single(permutation_operator(
            SystemLabel::new(K, n_out),
            &(0..n_out).collect::<Vec<_>>(),
        )?),
    })
}

/// The same scheme with the Luders pointer of the same POVM.
pub fn luders_variant(spec: &ProtocolSpec) -> Result<ProtocolSpec> {
    let mut out = spec.clone();
    let povm = povm_of_instrument(&spec.pointer.instrument()?)?;
    out.pointer = PointerSpec::Luders {
        effects: povm.effects().to_vec(),
    };
    Ok(out)
}

/// Trivial feedback and an `n`-stage erasure of `M K` into fresh `B2`
/// registers, driving `rho^{MK}_3` to `rho^{MK}_0`.
pub fn build_violating_feedback_erasure(base: &ProtocolSpec, stages: usize) -> Result<ProtocolSpec> {
    let mut spec = base.clone();
    spec.name = format!("violating-erasure-{stages}");
    spec.feedback = vec![Circuit::identity(); spec.n_outcomes()];
    spec.bath1 = Bath::empty();
    // rho^{MK}_3 under trivial feedback equals rho^{MK}_2
    let trace = crate::protocol::run(&ProtocolSpec {
        erasure: Circuit::identity(),
        bath2: Bath::empty(),
        ..spec.clone()
    })?;
    let mk3 = trace.rho_amk_3.partial_trace(&[M, K])?;
    let (circuit, terms) = staged_thermalization(&mk3, &spec.rho0_mk()?, stages, "B2", spec.beta)?;
    spec.bath2 = Bath::empty();
    for t in terms {
        spec.bath2.add(t);
    }
    spec.erasure = circuit;
    Ok(spec)
}

/// `W_tot - (-dF^A_{0->4})`: positive when the information-thermodynamic
/// second law is violated.
pub fn violation_margin(spec: &ProtocolSpec) -> Result<f64> {
    let r = crate::laws::evaluate(spec)?;
    Ok(r.second_laws.information.lhs - r.second_laws.information.rhs)
}

fn sigma_x(name: &str) -> Operator {
    Operator::new(
        vec![SystemLabel::new(name, 2)],
        crate::operator::real_matrix(&[&[0.0, 1.0], &[1.0, 0.0]]),
    )
    .expect("valid")
}

fn cnot_am() -> Operator {
    let m = crate::operator::real_matrix(&[
        &[1.0, 0.0, 0.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
        &[0.0, 0.0, 1.0, 0.0],
    ]);
    Operator::new(vec![SystemLabel::new(A, 2), SystemLabel::new(M, 2)], m).expect("valid")
}

/// Nothing happens: trivial premeasurement, a one-outcome identity pointer,
/// no feedback and no erasure. Every ledger entry vanishes.
pub fn build_null(beta: f64) -> Result<ProtocolSpec> {
    check_beta(beta)?;
    let q = |name: &str| SystemLabel::new(name, 2);
    let mut bath1 = Bath::empty();
    bath1.add(diag_on("B1.0", &[0.0, 0.4]));
    let mut bath2 = Bath::empty();
    bath2.add(diag_on("B2.0", &[0.0, 0.9]));
    Ok(ProtocolSpec {
        name: "null".into(),
        seed: None,
        beta,
        h_a: (0..5).map(|_| diag_on(A, &[0.0, 0.7])).collect(),
        h_mk: Operator::diagonal(vec![q(M), SystemLabel::new(K, 1)], &[0.0, 0.5])?,
        bath1,
        bath2,
        rho0_a: diag_on(A, &[0.6, 0.4]),
        rho0_m: diag_on(M, &[0.8, 0.2]),
        u: Operator::identity(vec![q(A), q(M)])?,
        pointer: PointerSpec::Kraus {
            operations: vec![vec![Operator::identity(vec![q(M)])?]],
        },
        feedback: vec![Circuit::identity()],
        erasure: Circuit::identity(),
    })
}

/// Szilard engine: a maximally mixed qubit is copied into a blank memory,
/// read out, flipped to `|0>` on outcome 1, expanded back to `1/2` against
/// `n` bath registers, and the memory is reset in `n` stages.
pub fn build_szilard(cfg: &ScenarioConfig) -> Result<ProtocolSpec> {
    check_beta(cfg.beta)?;
    let n = cfg.stages;
    let q = |name: &str| SystemLabel::new(name, 2);
    let zero_a = Operator::basis_projector(q(A), 0)?;
    let half_a = Operator::identity(vec![q(A)])?.scale(0.5);
    let (expand, b1_terms) = staged_thermalization(&zero_a, &half_a, n, "B1", cfg.beta)?;
    let mut bath1 = Bath::empty();
    for t in b1_terms {
        bath1.add(t);
    }
    let flip = Circuit::single(sigma_x(A));
    let feedback = vec![expand.clone(), append(flip, expand)];

    let mut spec = ProtocolSpec {
        name: format!("szilard-{n}"),
        seed: None,
        beta: cfg.beta,
        h_a: flat_h_a(2),
        h_mk: zero_h_mk(2, 2),
        bath1,
        bath2: Bath::empty(),
        rho0_a: half_a,
        rho0_m: Operator::basis_projector(q(M), 0)?,
        u: cnot_am(),
        pointer: PointerSpec::Luders {
            effects: vec![diag_on(M, &[1.0, 0.0]), diag_on(M, &[0.0, 1.0])],
        },
        feedback,
        erasure: Circuit::identity(),
    };
    let mk3 = Operator::diagonal(vec![q(M), q(K)], &[0.5, 0.0, 0.0, 0.5])?;
    let (erase, b2_terms) = staged_thermalization(&mk3, &spec.rho0_mk()?, n, "B2", cfg.beta)?;
    for t in b2_terms {
        spec.bath2.add(t);
    }
    spec.erasure = erase;
    Ok(spec)
}

/// Saturating feedback: the Szilard readout followed by `X^k` alone.
/// Posteriors merge into `|0>` and no bath is used.
pub fn build_merging_feedback(cfg: &ScenarioConfig) -> Result<ProtocolSpec> {
    let mut spec = build_szilard(&ScenarioConfig { stages: 1, ..cfg.clone() })?;
    spec.name = "merging-feedback".into();
    spec.bath1 = Bath::empty();
    spec.feedback = vec![Circuit::identity(), Circuit::single(sigma_x(A))];
    Ok(spec)
}

/// Measure-and-prepare pointer with rank-one effects and output `|k>`,
/// trivial premeasurement, trivial feedback and `n`-stage erasure.
///
/// The memory starts in the state with spectrum `(0.6, 0.4)` rotated by
/// `angle` out of the pointer basis. At `angle = 0` the register state after
/// readout has the same spectrum as the initial one and the erasure is
/// reversible; otherwise its dissipation falls off with the stage count.
pub fn build_quasistatic_demon(beta: f64, angle: f64, stages: usize) -> Result<ProtocolSpec> {
    check_beta(beta)?;
    let q = |name: &str| SystemLabel::new(name, 2);
    let (c, s) = (angle.cos(), angle.sin());
    let rot = Matrix::from_fn(2, 2, |i, j| {
        C64::new([[c, -s], [s, c]][i][j], 0.0)
    });
    let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.4, 0.0)]));
    let rho_m = Operator::new(vec![q(M)], &rot * d * rot.adjoint())?;
    let effects = vec![diag_on(M, &[1.0, 0.0]), diag_on(M, &[0.0, 1.0])];
    let prepared = vec![
        Operator::basis_projector(q(M), 0)?,
        Operator::basis_projector(q(M), 1)?,
    ];
    let base = ProtocolSpec {
        name: "quasistatic-demon".into(),
        seed: None,
        beta,
        h_a: (0..5).map(|_| diag_on(A, &[0.0, 0.5])).collect(),
        h_mk: zero_h_mk(2, 2),
        bath1: Bath::empty(),
        bath2: Bath::empty(),
        rho0_a: diag_on(A, &[0.7, 0.3]),
        rho0_m: rho_m,
        u: Operator::identity(vec![q(A), q(M)])?,
        pointer: PointerSpec::Nuclear { effects, prepared },
        feedback: vec![Circuit::identity(); 2],
        erasure: Circuit::identity(),
    };
    let mut spec = build_violating_feedback_erasure(&base, stages)?;
    spec.name = format!("quasistatic-demon-{stages}");
    Ok(spec)
}

/// Two-qubit target whose second qubit is swapped with the memory; the
/// memory marginal is restored without erasing, leaving the target
/// correlated with it.
pub fn build_partial_erasure() -> Result<ProtocolSpec> {
    let a = SystemLabel::new(A, 4);
    let m = SystemLabel::new(M, 2);
    // SWAP of the low qubit of A with M
    let mut u = Matrix::zeros(8, 8);
    for a1 in 0..2 {
        for a2 in 0..2 {
            for mm in 0..2 {
                let from = (a1 * 2 + a2) * 2 + mm;
                let to = (a1 * 2 + mm) * 2 + a2;
                u[(to, from)] = C64::new(1.0, 0.0);
            }
        }
    }
    Ok(ProtocolSpec {
        name: "partial-erasure".into(),
        seed: None,
        beta: 1.0,
        h_a: (0..5).map(|_| diag_on(A, &[0.0, 0.2, 0.4, 0.6])).collect(),
        h_mk: zero_h_mk(2, 1),
        bath1: Bath::empty(),
        bath2: Bath::empty(),
        rho0_a: diag_on(A, &[0.5, 0.0, 0.0, 0.5]),
        rho0_m: diag_on(M, &[0.5, 0.5]),
        u: Operator::new(vec![a, m.clone()], u)?,
        pointer: PointerSpec::Kraus {
            operations: vec![vec![Operator::identity(vec![m])?]],
        },
        feedback: vec![Circuit::identity()],
        erasure: Circuit::identity(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RankBoundDiagnostics {
    /// Induced effects that are not the null effect.
    pub nonzero_effects: usize,
    /// Numerical rank of their Gram matrix.
    pub gram_rank: usize,
    pub effects_independent: bool,
    pub kraus_ranks: Vec<usize>,
    pub efficient: bool,
    pub memory_rank: usize,
    /// `sum_k dim(H^{M_k}) / N` over the non-null outcomes.
    pub bound: f64,
    pub bound_holds: bool,
    /// False when the hypotheses hold, the bound fails, and the induced
    /// instrument is nevertheless efficient.
    pub consistent: bool,
}

/// Rank inequality for efficient schemes with a PVM pointer. `sector_dims`
/// gives `dim(H^{M_k})` per outcome.
pub fn rank_bound_check(scheme: &MeasurementScheme, sector_dims: &[usize]) -> Result<RankBoundDiagnostics> {
    if sector_dims.len() != scheme.pointer.n_outcomes() {
        return composition("one sector dimension per pointer outcome is required");
    }
    let induced = induced_system_instrument(scheme)?;
    let povm = povm_of_instrument(&induced)?;
    let nonzero: Vec<usize> = (0..povm.len())
        .filter(|&k| povm.effects()[k].max_abs() > RANK_TOL)
        .collect();
    let gram = Matrix::from_fn(nonzero.len(), nonzero.len(), |i, j| {
        let (a, b) = (&povm.effects()[nonzero[i]], &povm.effects()[nonzero[j]]);
        (a.matrix().adjoint() * b.matrix()).trace()
    });
    let gram_rank = hermitian_eig_matrix(&gram).values.iter().filter(|&&x| x > RANK_TOL).count();
    let kraus_ranks: Vec<usize> = induced.operations().iter().map(|o| o.kraus_rank()).collect();
    let efficient = is_efficient(&induced);
    let memory_rank = hermitian_eig(&scheme.rho0_m)?
        .values
        .iter()
        .filter(|&&x| x > RANK_TOL)
        .count();
    let n = nonzero.len().max(1);
    let bound = nonzero.iter().map(|&k| sector_dims[k]).sum::<usize>() as f64 / n as f64;
    let bound_holds = memory_rank as f64 <= bound;
    let effects_independent = gram_rank == nonzero.len();
    Ok(RankBoundDiagnostics {
        nonzero_effects: nonzero.len(),
        gram_rank,
        effects_independent,
        kraus_ranks,
        efficient,
        memory_rank,
        bound,
        bound_holds,
        consistent: !(effects_independent && !bound_holds && efficient),
    })
}

/// CNOT premeasurement with a computational-basis PVM pointer and the given
/// diagonal memory state.
pub fn cnot_scheme(memory_diag: &[f64]) -> Result<MeasurementScheme> {
    let m = SystemLabel::new(M, 2);
    let pvm = crate::channels::Povm::computational(m)?;
    MeasurementScheme::new(
        SystemLabel::new(A, 2),
        crate::operator::DensityOperator::new(diag_on(M, memory_diag))?,
        cnot_am(),
        luders_instrument(&pvm)?,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointerClass {
    Luders,
    BistochasticNonLuders,
    Nuclear,
    Generic,
}

impl PointerClass {
    pub const ALL: [PointerClass; 4] = [
        PointerClass::Luders,
        PointerClass::BistochasticNonLuders,
        PointerClass::Nuclear,
        PointerClass::Generic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PointerClass::Luders => "luders",
            PointerClass::BistochasticNonLuders => "bistochastic-non-luders",
            PointerClass::Nuclear => "nuclear",
            PointerClass::Generic => "generic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErasureMode {
    /// Scramble `M K` with a scratch register, then swap in a register held
    /// at the reset state: always perfect.
    Reset,
    /// Scramble only: erasure generally fails.
    ScrambleOnly,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleConfig {
    pub max_dim_a: usize,
    pub max_dim_m: usize,
    pub max_outcomes: usize,
    pub pointer_class: PointerClass,
    pub erasure: ErasureMode,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            max_dim_a: 3,
            max_dim_m: 3,
            max_outcomes: 3,
            pointer_class: PointerClass::Luders,
            erasure: ErasureMode::Reset,
        }
    }
}

fn labeled(name: &str, m: Matrix) -> Operator {
    let d = m.nrows();
    Operator::new(vec![SystemLabel::new(name, d)], m).expect("square matrix")
}

fn random_pointer(class: PointerClass, dm: usize, nk: usize, rng: &mut DemonRng) -> Result<PointerSpec> {
    let m = SystemLabel::new(M, dm);
    let base: Instrument = random_instrument(m.clone(), nk, 2, rng)?;
    let povm = povm_of_instrument(&base)?;
    Ok(match class {
        PointerClass::Luders => PointerSpec::Luders {
            effects: povm.effects().to_vec(),
        },
        PointerClass::BistochasticNonLuders => {
            let phi = random_mixed_unitary_channel(m, 2, rng)?;
            PointerSpec::from_instrument(&postprocess(&luders_instrument(&povm)?, &phi)?)
        }
        PointerClass::Nuclear => {
            let prepared = (0..nk)
                .map(|_| {
                    let rank = rng.random_range(1..=dm);
                    labeled(M, random_density_matrix(dm, rank, rng))
                })
                .collect();
            PointerSpec::Nuclear {
                effects: povm.effects().to_vec(),
                prepared,
            }
        }
        PointerClass::Generic => {
            let single = random_instrument(m.clone(), nk, 1, rng)?;
            let reset = random_partial_reset_channel(m, rng)?;
            PointerSpec::from_instrument(&postprocess(&single, &reset)?)
        }
    })
}

/// Random protocol with one `B1` qubit, a scratch `B2` qubit and, in reset
/// mode, `B2` registers `B2.r.M`, `B2.r.K` thermal at the reset state.
pub fn random_protocol(cfg: &SampleConfig, seed: u64) -> Result<ProtocolSpec> {
    let mut rng = rng_from_seed(seed);
    let rng = &mut rng;
    let beta = rng.random_range(0.7..2.0);
    let da = rng.random_range(2..=cfg.max_dim_a.max(2));
    let dm = rng.random_range(2..=cfg.max_dim_m.max(2));
    let nk = rng.random_range(2..=cfg.max_outcomes.max(2));
    let a = SystemLabel::new(A, da);
    let m = SystemLabel::new(M, dm);
    let k = SystemLabel::new(K, nk);

    let mut h_a: Vec<Operator> = (0..4).map(|_| labeled(A, random_hermitian(da, rng))).collect();
    h_a.push(h_a[3].clone());
    let h_mk = Operator::new(vec![m.clone(), k.clone()], random_hermitian(dm * nk, rng))?;
    let rank_a = rng.random_range(1..=da);
    let rank_m = rng.random_range(1..=dm);
    let rho0_a = labeled(A, random_density_matrix(da, rank_a, rng));
    let mut rho0_m = random_density_matrix(dm, rank_m, rng);
    if cfg.pointer_class == PointerClass::Generic {
        // close to maximally mixed
        let w = rng.random_range(0.0..0.5);
        rho0_m = rho0_m * C64::new(w, 0.0) + Matrix::identity(dm, dm) * C64::new((1.0 - w) / dm as f64, 0.0);
    }
    let rho0_m = labeled(M, rho0_m);
    let u = Operator::new(vec![a.clone(), m.clone()], haar_unitary(da * dm, rng))?;
    let pointer = random_pointer(cfg.pointer_class, dm, nk, rng)?;

    let b1 = SystemLabel::new("B1.0", 2);
    let mut bath1 = Bath::empty();
    bath1.add(Operator::new(vec![b1.clone()], random_hermitian(2, rng))?);
    let feedback = (0..nk)
        .map(|_| {
            Ok(Circuit::single(Operator::new(
                vec![b1.clone(), a.clone()],
                haar_unitary(2 * da, rng),
            )?))
        })
        .collect::<Result<Vec<_>>>()?;

    let scratch = SystemLabel::new("B2.s", 2);
    let mut bath2 = Bath::empty();
    bath2.add(Operator::new(vec![scratch.clone()], random_hermitian(2, rng))?);
    let w = Operator::new(vec![m.clone(), k.clone(), scratch], haar_unitary(dm * nk * 2, rng))?;
    let mut erasure = Circuit::single(w);

    let mut spec = ProtocolSpec {
        name: format!("random-{}-{seed}", cfg.pointer_class.as_str()),
        seed: Some(seed),
        beta,
        h_a,
        h_mk,
        bath1,
        bath2,
        rho0_a,
        rho0_m,
        u,
        pointer,
        feedback,
        erasure: Circuit::identity(),
    };
    if cfg.erasure == ErasureMode::Reset {
        let reset = regularize(&spec.rho0_mk()?)?;
        let labels = vec![SystemLabel::new("B2.r.M", dm), SystemLabel::new("B2.r.K", nk)];
        spec.bath2.add(thermal_hamiltonian(&reset, beta)?.relabeled(labels)?);
        erasure = erasure
            .then(Gate::Swap(M.into(), "B2.r.M".into()))
            .then(Gate::Swap(K.into(), "B2.r.K".into()));
    }
    spec.erasure = erasure;
    Ok(spec)
}

/// Random member of the partial-erasure family: `A = A1 A2` carries
/// `sum_i l_i |psi_i><psi_i| (x) |e_i><e_i|`, the memory starts in
/// `sum_i l_i |e_i><e_i|`, `U` swaps `A2` with `M`, a single-outcome pointer
/// and `V = 1`. The memory marginal is restored while `A1` stays correlated
/// with it.
pub fn random_partial_erasure(seed: u64) -> Result<ProtocolSpec> {
    let mut rng = rng_from_seed(seed);
    let rng = &mut rng;
    let mut spec = build_partial_erasure()?;
    spec.name = format!("partial-erasure-{seed}");
    spec.seed = Some(seed);
    spec.beta = rng.random_range(0.7..2.0);
    let l: f64 = rng.random_range(0.1..0.9);
    let lam = [l, 1.0 - l];
    let e = haar_unitary(2, rng);
    let psi = haar_unitary(2, rng);
    // psi_0 and psi_1 need not be orthogonal: take two random vectors
    let psi1 = haar_unitary(2, rng);
    let cols = [psi.column(0).into_owned(), psi1.column(0).into_owned()];
    let mut rho_a = Matrix::zeros(4, 4);
    let mut rho_m = Matrix::zeros(2, 2);
    for i in 0..2 {
        let ei = e.column(i).into_owned();
        let v = cols[i].kronecker(&ei);
        rho_a += &v * v.adjoint() * C64::new(lam[i], 0.0);
        rho_m += &ei * ei.adjoint() * C64::new(lam[i], 0.0);
    }
    spec.rho0_a = labeled(A, rho_a);
    spec.rho0_m = labeled(M, rho_m);
    let mut h: Vec<Operator> = (0..4).map(|_| labeled(A, random_hermitian(4, rng))).collect();
    h.push(h[3].clone());
    spec.h_a = h;
    Ok(spec)
}
