//! Kraus operations, instruments and POVMs.
//!
//! Instruments are held in the Schrodinger picture as explicit Kraus lists;
//! the Heisenberg dual is computed on demand.

use rand::Rng;

use crate::error::{composition, domain, Result};
use crate::operator::{
    hermitian_eig, hermitian_eig_matrix, matrix_sqrt, DensityOperator, Matrix, Operator,
    SystemLabel, C64,
};
use crate::random::{haar_isometry, random_partition, random_pure_vector, rng_from_seed};

/// Tolerance for trace preservation, unitality and POVM closure.
pub const CHANNEL_TOL: f64 = 1e-10;
/// Branch weights at or below this leave the posterior undefined.
pub const EPS_PROB: f64 = 1e-12;
/// Eigenvalue threshold for Kraus (Choi) rank.
pub const RANK_TOL: f64 = 1e-10;

fn max_abs(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn identity_residual(m: &Matrix) -> f64 {
    let d = m.nrows();
    max_abs(&(m - Matrix::identity(d, d)))
}

/// Trace non-increasing CP map given by Kraus operators on a common layout.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausOperation {
    kraus: Vec<Operator>,
}

impl KrausOperation {
    pub fn new(kraus: Vec<Operator>) -> Result<Self> {
        let Some(first) = kraus.first() else {
            return domain("Kraus operation needs at least one operator");
        };
        if kraus.iter().any(|k| k.factors() != first.factors()) {
            return composition("Kraus operators act on different layouts");
        }
        let op = Self { kraus };
        let top = hermitian_eig_matrix(op.effect().matrix())
            .values
            .last()
            .copied()
            .unwrap_or(0.0);
        if top > 1.0 + CHANNEL_TOL {
            return domain(format!("operation increases trace (sum K^dag K has eigenvalue {top})"));
        }
        Ok(op)
    }

    pub fn unitary(u: Operator) -> Result<Self> {
        if !u.is_unitary() {
            return domain(format!("gate is not unitary (residual {:.3e})", u.unitarity_residual()));
        }
        Self::new(vec![u])
    }

    pub fn kraus(&self) -> &[Operator] {
        &self.kraus
    }

    pub fn factors(&self) -> &[SystemLabel] {
        self.kraus[0].factors()
    }

    /// `sum K^dag K`.
    pub fn effect(&self) -> Operator {
        let mut acc = Matrix::zeros(self.kraus[0].dim(), self.kraus[0].dim());
        for k in &self.kraus {
            acc += k.matrix().adjoint() * k.matrix();
        }
        Operator::new(self.factors().to_vec(), acc).expect("layout checked")
    }

    /// `sum K K^dag`.
    pub fn unit_image(&self) -> Matrix {
        let mut acc = Matrix::zeros(self.kraus[0].dim(), self.kraus[0].dim());
        for k in &self.kraus {
            acc += k.matrix() * k.matrix().adjoint();
        }
        acc
    }

    /// Heisenberg dual `sum K^dag x K`.
    pub fn dual(&self, x: &Operator) -> Result<Operator> {
        let x = x.permuted(&self.kraus[0].names())?;
        let mut acc = Matrix::zeros(x.dim(), x.dim());
        for k in &self.kraus {
            acc += k.matrix().adjoint() * x.matrix() * k.matrix();
        }
        Operator::new(self.factors().to_vec(), acc)
    }

    /// Unnormalized output `sum K rho K^dag`, with each `K` acting locally on
    /// its factors inside the layout of `rho`.
    pub fn apply_unnormalized(&self, rho: &Operator) -> Result<Operator> {
        let mut acc = Matrix::zeros(rho.dim(), rho.dim());
        for k in &self.kraus {
            let kf = if k.factors() == rho.factors() {
                k.clone()
            } else {
                k.embedded(rho.factors())?
            };
            acc += kf.matrix() * rho.matrix() * kf.matrix().adjoint();
        }
        Operator::new(rho.factors().to_vec(), acc)
    }

    /// Kraus rank: numerical rank of the Choi matrix, read off the Gram
    /// matrix of the Kraus list (same nonzero spectrum).
    pub fn kraus_rank(&self) -> usize {
        self.gram_eig().values.iter().filter(|&&x| x > RANK_TOL).count()
    }

    fn gram_eig(&self) -> crate::operator::HermitianEigen {
        let n = self.kraus.len();
        let g = Matrix::from_fn(n, n, |i, j| {
            (self.kraus[i].matrix().adjoint() * self.kraus[j].matrix()).trace()
        });
        hermitian_eig_matrix(&g)
    }

    /// Equivalent operation with a minimal Kraus list.
    pub fn compressed(&self) -> Self {
        let eig = self.gram_eig();
        let mut out = Vec::new();
        for (a, &lam) in eig.values.iter().enumerate() {
            if lam <= RANK_TOL * 1e-2 {
                continue;
            }
            let mut acc = Matrix::zeros(self.kraus[0].dim(), self.kraus[0].dim());
            for (j, k) in self.kraus.iter().enumerate() {
                acc += k.matrix() * eig.vectors[(j, a)];
            }
            out.push(Operator::new(self.factors().to_vec(), acc).expect("layout checked"));
        }
        if out.is_empty() {
            out.push(Operator::zeros(self.factors().to_vec()).expect("layout checked"));
        }
        Self { kraus: out }
    }
}

/// Result of applying one operation to a state.
#[derive(Clone, Debug)]
pub struct Branch {
    pub weight: f64,
    /// `None` when the weight is at or below `EPS_PROB`.
    pub posterior: Option<DensityOperator>,
}

pub fn apply_operation(op: &KrausOperation, rho: &Operator) -> Result<Branch> {
    let out = op.apply_unnormalized(rho)?;
    let weight = out.trace().re;
    let posterior = if weight > EPS_PROB {
        Some(DensityOperator::trusted(out.scale(1.0 / weight)))
    } else {
        None
    };
    Ok(Branch { weight, posterior })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    effects: Vec<Operator>,
}

impl Povm {
    pub fn new(effects: Vec<Operator>) -> Result<Self> {
        let Some(first) = effects.first() else {
            return domain("POVM needs at least one effect");
        };
        let mut sum = Matrix::zeros(first.dim(), first.dim());
        for (k, e) in effects.iter().enumerate() {
            if e.factors() != first.factors() {
                return composition("POVM effects act on different layouts");
            }
            let spec = hermitian_eig(e)?.values;
            if spec[0] < -CHANNEL_TOL || spec[spec.len() - 1] > 1.0 + CHANNEL_TOL {
                return domain(format!("effect {k} has spectrum outside [0, 1]"));
            }
            sum += e.matrix();
        }
        let r = identity_residual(&sum);
        if r > CHANNEL_TOL {
            return domain(format!("effects do not sum to identity (residual {r:.3e})"));
        }
        Ok(Self { effects })
    }

    pub fn effects(&self) -> &[Operator] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn factors(&self) -> &[SystemLabel] {
        self.effects[0].factors()
    }

    /// Projective measurement in the computational basis of one factor.
    pub fn computational(label: SystemLabel) -> Result<Self> {
        let effects = (0..label.dim)
            .map(|i| Operator::basis_projector(label.clone(), i))
            .collect::<Result<Vec<_>>>()?;
        Self::new(effects)
    }

    pub fn is_rank_one(&self) -> bool {
        self.effects.iter().all(|e| {
            hermitian_eig(e)
                .map(|eig| eig.values.iter().filter(|&&x| x > RANK_TOL).count() <= 1)
                .unwrap_or(false)
        })
    }

    /// Born probabilities `Tr[M_k rho]`, with `rho` possibly on a larger layout.
    pub fn probabilities(&self, rho: &Operator) -> Result<Vec<f64>> {
        let names = self.effects[0].names();
        let marg = rho.partial_trace(&names)?;
        self.effects.iter().map(|e| marg.expectation(e)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    operations: Vec<KrausOperation>,
}

impl Instrument {
    pub fn new(operations: Vec<KrausOperation>) -> Result<Self> {
        let Some(first) = operations.first() else {
            return domain("instrument needs at least one outcome");
        };
        if operations.iter().any(|o| o.factors() != first.factors()) {
            return composition("instrument operations act on different layouts");
        }
        let ins = Self { operations };
        let r = ins.trace_preservation_residual();
        if r > CHANNEL_TOL {
            return domain(format!("instrument is not trace preserving (residual {r:.3e})"));
        }
        Ok(ins)
    }

    pub fn from_kraus(ops: Vec<Vec<Operator>>) -> Result<Self> {
        Self::new(ops.into_iter().map(KrausOperation::new).collect::<Result<Vec<_>>>()?)
    }

    pub fn operations(&self) -> &[KrausOperation] {
        &self.operations
    }

    pub fn operation(&self, k: usize) -> &KrausOperation {
        &self.operations[k]
    }

    pub fn n_outcomes(&self) -> usize {
        self.operations.len()
    }

    pub fn factors(&self) -> &[SystemLabel] {
        self.operations[0].factors()
    }

    pub fn trace_preservation_residual(&self) -> f64 {
        let d = self.operations[0].kraus[0].dim();
        let mut acc = Matrix::zeros(d, d);
        for o in &self.operations {
            acc += o.effect().matrix();
        }
        identity_residual(&acc)
    }

    pub fn unitality_residual(&self) -> f64 {
        let d = self.operations[0].kraus[0].dim();
        let mut acc = Matrix::zeros(d, d);
        for o in &self.operations {
            acc += o.unit_image();
        }
        identity_residual(&acc)
    }

    /// Single-outcome identity channel on `label`.
    pub fn trivial(label: SystemLabel) -> Result<Self> {
        Self::new(vec![KrausOperation::new(vec![Operator::identity(vec![label])?])?])
    }

    /// Applies every operation to `rho`.
    pub fn apply(&self, rho: &Operator) -> Result<Vec<Branch>> {
        self.operations.iter().map(|o| apply_operation(o, rho)).collect()
    }

    /// Sum of all operations applied to `rho`.
    pub fn apply_channel(&self, rho: &Operator) -> Result<Operator> {
        let mut acc = Operator::zeros(rho.factors().to_vec())?;
        for o in &self.operations {
            acc = acc.add(&o.apply_unnormalized(rho)?)?;
        }
        Ok(acc)
    }
}

pub fn povm_of_instrument(ins: &Instrument) -> Result<Povm> {
    Povm::new(ins.operations.iter().map(|o| o.effect()).collect())
}

/// Square-root instrument `rho -> sqrt(M_k) rho sqrt(M_k)`.
pub fn luders_instrument(m: &Povm) -> Result<Instrument> {
    let ops = m
        .effects
        .iter()
        .map(|e| KrausOperation::new(vec![matrix_sqrt(e)?]))
        .collect::<Result<Vec<_>>>()?;
    Instrument::new(ops)
}

/// Measure-and-prepare instrument `rho -> Tr[M_k rho] prepared_k`.
///
/// With `M_k = sum_i mu_i |e_i><e_i|` and `prepared_k = sum_j q_j |f_j><f_j|`
/// the Kraus operators are `sqrt(q_j mu_i) |f_j><e_i|`.
pub fn nuclear_instrument(m: &Povm, prepared: &[DensityOperator]) -> Result<Instrument> {
    if prepared.len() != m.len() {
        return composition(format!(
            "{} prepared states for {} outcomes",
            prepared.len(),
            m.len()
        ));
    }
    let factors = m.factors().to_vec();
    let d = m.effects[0].dim();
    let mut ops = Vec::with_capacity(m.len());
    for (e, p) in m.effects.iter().zip(prepared) {
        let p = DensityOperator::new(p.operator().clone())?;
        if p.factors() != factors.as_slice() {
            return composition("prepared state lives on a different layout than the POVM");
        }
        let ee = hermitian_eig(e)?;
        let pe = hermitian_eig(&p)?;
        let mut kraus = Vec::new();
        for (i, &mu) in ee.values.iter().enumerate() {
            if mu <= 0.0 {
                continue;
            }
            for (j, &qj) in pe.values.iter().enumerate() {
                if qj <= 0.0 {
                    continue;
                }
                let s = C64::new((mu * qj).sqrt(), 0.0);
                let k = pe.vectors.column(j) * ee.vectors.column(i).adjoint() * s;
                kraus.push(Operator::new(factors.clone(), k)?);
            }
        }
        if kraus.is_empty() {
            kraus.push(Operator::new(factors.clone(), Matrix::zeros(d, d))?);
        }
        ops.push(KrausOperation::new(kraus)?);
    }
    Instrument::new(ops)
}

#[derive(Clone, Debug)]
pub struct BistochasticCheck {
    pub pass: bool,
    pub trace_residual: f64,
    pub unital_residual: f64,
}

pub fn is_bistochastic(ins: &Instrument) -> BistochasticCheck {
    let trace_residual = ins.trace_preservation_residual();
    let unital_residual = ins.unitality_residual();
    BistochasticCheck {
        pass: trace_residual <= CHANNEL_TOL && unital_residual <= CHANNEL_TOL,
        trace_residual,
        unital_residual,
    }
}

/// Every operation has Kraus rank at most one. A null operation (rank 0)
/// is written with a single zero Kraus operator and counts as efficient.
pub fn is_efficient(ins: &Instrument) -> bool {
    ins.operations.iter().all(|o| o.kraus_rank() <= 1)
}

/// Sampled quasi-completeness: posteriors of `samples` random pure inputs
/// must be pure to within `1e-9`. Passing does not prove the property.
pub fn quasi_complete_sampled(ins: &Instrument, samples: usize, seed: u64) -> Result<bool> {
    let mut rng = rng_from_seed(seed);
    let factors = ins.factors().to_vec();
    let d = crate::operator::total_dim(&factors);
    for _ in 0..samples {
        let psi = Operator::pure(factors.clone(), &random_pure_vector(d, &mut rng))?;
        for b in ins.apply(&psi)? {
            if let Some(post) = b.posterior {
                if (post.purity() - 1.0).abs() > 1e-9 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Memory `M`, its initial state, the premeasurement unitary on `A (x) M`
/// and the pointer instrument on `M`.
#[derive(Clone, Debug)]
pub struct MeasurementScheme {
    pub system: SystemLabel,
    pub rho0_m: DensityOperator,
    pub u: Operator,
    pub pointer: Instrument,
}

impl MeasurementScheme {
    pub fn new(system: SystemLabel, rho0_m: DensityOperator, u: Operator, pointer: Instrument) -> Result<Self> {
        if rho0_m.factors().len() != 1 {
            return composition("memory state must live on a single factor");
        }
        let mem = rho0_m.factors()[0].clone();
        if pointer.factors() != [mem.clone()] {
            return composition("pointer instrument must act on the memory factor");
        }
        let u = u.permuted(&[system.name.as_str(), mem.name.as_str()])?;
        if u.factors() != [system.clone(), mem] {
            return composition("premeasurement unitary must act on system and memory");
        }
        if !u.is_unitary() {
            return domain(format!(
                "premeasurement is not unitary (residual {:.3e})",
                u.unitarity_residual()
            ));
        }
        Ok(Self { system, rho0_m, u, pointer })
    }

    pub fn memory(&self) -> &SystemLabel {
        &self.rho0_m.factors()[0]
    }
}

/// Kraus form of `rho -> Tr_M[(id (x) M_k)(U (rho (x) rho0_M) U^dag)]`:
/// `E = sqrt(lambda_l) (1 (x) <m|)(1 (x) K)U(1 (x) |l>)`.
pub fn induced_system_instrument(scheme: &MeasurementScheme) -> Result<Instrument> {
    let da = scheme.system.dim;
    let dm = scheme.memory().dim;
    let mem = scheme.memory().clone();
    let eig = hermitian_eig(&scheme.rho0_m)?;
    let mut ops = Vec::with_capacity(scheme.pointer.n_outcomes());
    for op in scheme.pointer.operations() {
        let mut kraus = Vec::new();
        for k in op.kraus() {
            let kf = k.embedded(&[scheme.system.clone(), mem.clone()])?;
            let w = kf.matrix() * scheme.u.matrix();
            for (l, &lam) in eig.values.iter().enumerate() {
                if lam <= 0.0 {
                    continue;
                }
                let sl = C64::new(lam.sqrt(), 0.0);
                for m in 0..dm {
                    let e = Matrix::from_fn(da, da, |a, a2| {
                        let mut acc = C64::new(0.0, 0.0);
                        for mm in 0..dm {
                            acc += w[(a * dm + m, a2 * dm + mm)] * eig.vectors[(mm, l)];
                        }
                        acc * sl
                    });
                    kraus.push(Operator::new(vec![scheme.system.clone()], e)?);
                }
            }
        }
        if kraus.is_empty() {
            kraus.push(Operator::zeros(vec![scheme.system.clone()])?);
        }
        ops.push(KrausOperation::new(kraus)?.compressed());
    }
    Instrument::new(ops)
}

/// Stinespring sample: a Haar isometry `d -> d * env` with the environment
/// basis split at random into `n_outcomes` nonempty groups.
pub fn random_instrument<R: Rng + ?Sized>(
    label: SystemLabel,
    n_outcomes: usize,
    env_per_outcome: usize,
    rng: &mut R,
) -> Result<Instrument> {
    let d = label.dim;
    let env = n_outcomes * env_per_outcome.max(1);
    let v = haar_isometry(d * env, d, rng);
    let groups = random_partition(env, n_outcomes, rng);
    let mut ops = Vec::with_capacity(n_outcomes);
    for g in groups {
        let mut kraus = Vec::with_capacity(g.len());
        for j in g {
            // output ordered as system (x) env, env index j
            let k = Matrix::from_fn(d, d, |o, i| v[(o * env + j, i)]);
            kraus.push(Operator::new(vec![label.clone()], k)?);
        }
        ops.push(KrausOperation::new(kraus)?);
    }
    Instrument::new(ops)
}

pub fn random_unitary_operator<R: Rng + ?Sized>(factors: Vec<SystemLabel>, rng: &mut R) -> Result<Operator> {
    let d = crate::operator::total_dim(&factors);
    Operator::new(factors, crate::random::haar_unitary(d, rng))
}

pub fn random_density_operator<R: Rng + ?Sized>(
    factors: Vec<SystemLabel>,
    rank: usize,
    rng: &mut R,
) -> Result<DensityOperator> {
    let d = crate::operator::total_dim(&factors);
    Ok(DensityOperator::trusted(Operator::new(
        factors,
        crate::random::random_density_matrix(d, rank, rng),
    )?))
}

/// Random unitary mixture `rho -> sum_i w_i V_i rho V_i^dag` on one factor.
pub fn random_mixed_unitary_channel<R: Rng + ?Sized>(
    label: SystemLabel,
    terms: usize,
    rng: &mut R,
) -> Result<KrausOperation> {
    let mut w: Vec<f64> = (0..terms).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    let kraus = w
        .iter()
        .map(|&wi| Ok(random_unitary_operator(vec![label.clone()], rng)?.scale(wi.sqrt())))
        .collect::<Result<Vec<_>>>()?;
    KrausOperation::new(kraus)
}

/// `rho -> (1 - l) U rho U^dag + l |phi><phi|` with `l` uniform in
/// `[0.8, 1)`, `U` Haar and `phi` a Haar-random pure state. Not unital.
pub fn random_partial_reset_channel<R: Rng + ?Sized>(label: SystemLabel, rng: &mut R) -> Result<KrausOperation> {
    let d = label.dim;
    let l: f64 = rng.random_range(0.8..1.0);
    let phi = random_pure_vector(d, rng);
    let mut kraus = vec![random_unitary_operator(vec![label.clone()], rng)?.scale((1.0 - l).sqrt())];
    for j in 0..d {
        let m = Matrix::from_fn(d, d, |r, c| if c == j { phi[r] * l.sqrt() } else { C64::new(0.0, 0.0) });
        kraus.push(Operator::new(vec![label.clone()], m)?);
    }
    KrausOperation::new(kraus)
}

/// `Phi o I_k` for every outcome: post-processing an instrument by a fixed
/// channel keeps its POVM and, for unital `Phi`, its bistochasticity.
pub fn postprocess(ins: &Instrument, phi: &KrausOperation) -> Result<Instrument> {
    let ops = ins
        .operations()
        .iter()
        .map(|o| {
            let mut kraus = Vec::new();
            for a in phi.kraus() {
                for b in o.kraus() {
                    kraus.push(a.mul(b)?);
                }
            }
            KrausOperation::new(kraus)
        })
        .collect::<Result<Vec<_>>>()?;
    Instrument::new(ops)
}
