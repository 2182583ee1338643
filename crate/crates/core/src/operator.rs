//! Dense complex operators over labeled tensor products.
//!
//! The composite basis is lexicographic in factor order with the first
//! factor most significant: for factors `[X, Y]` the basis state `|x y>` has
//! flat index `x * dim(Y) + y`. Entries live in an `nalgebra::DMatrix`
//! (column-major storage); all index arithmetic below goes through
//! `(row, col)` so the storage order never leaks out of this module.
//!
//! Hermitian eigendecompositions use nalgebra's Householder tridiagonalization
//! followed by implicit symmetric QR sweeps, after explicitly symmetrizing the
//! input. Spectra are returned in ascending order.

use std::fmt;
use std::ops::Deref;

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{composition, domain, Result};

pub type Matrix = DMatrix<C64>;

/// Relative tolerance on `max|X - X^dag|` against the largest entry.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Eigenvalues at or below this are outside the support.
pub const SUPPORT_CUTOFF: f64 = 1e-12;
/// Most negative eigenvalue a density operator may carry.
pub const NEGATIVITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const UNITARITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemLabel {
    pub name: String,
    pub dim: usize,
}

impl SystemLabel {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            dim,
        }
    }
}

impl fmt::Display for SystemLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.name, self.dim)
    }
}

pub fn total_dim(factors: &[SystemLabel]) -> usize {
    factors.iter().map(|f| f.dim).product()
}

fn check_factors(factors: &[SystemLabel]) -> Result<()> {
    for (i, f) in factors.iter().enumerate() {
        if f.dim == 0 {
            return composition(format!("factor {} has dimension 0", f.name));
        }
        if factors[..i].iter().any(|g| g.name == f.name) {
            return composition(format!("duplicate factor label {}", f.name));
        }
    }
    Ok(())
}

fn strides(factors: &[SystemLabel]) -> Vec<usize> {
    let mut s = vec![1; factors.len()];
    for i in (0..factors.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * factors[i + 1].dim;
    }
    s
}

/// Flat offsets of every multi-index over the factors `idx` (lexicographic,
/// first listed factor most significant).
fn offsets(factors: &[SystemLabel], strides: &[usize], idx: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &i in idx {
        let d = factors[i].dim;
        let mut next = Vec::with_capacity(out.len() * d);
        for &o in &out {
            for m in 0..d {
                next.push(o + m * strides[i]);
            }
        }
        out = next;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    factors: Vec<SystemLabel>,
    mat: Matrix,
}

impl Operator {
    pub fn new(factors: Vec<SystemLabel>, mat: Matrix) -> Result<Self> {
        check_factors(&factors)?;
        let d = total_dim(&factors);
        if mat.nrows() != d || mat.ncols() != d {
            return composition(format!(
                "matrix is {}x{} but factors {:?} need side {}",
                mat.nrows(),
                mat.ncols(),
                factors.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
                d
            ));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return domain("matrix has non-finite entries");
        }
        Ok(Self { factors, mat })
    }

    pub fn single(name: impl Into<String>, mat: Matrix) -> Result<Self> {
        let d = mat.nrows();
        Self::new(vec![SystemLabel::new(name, d)], mat)
    }

    pub fn identity(factors: Vec<SystemLabel>) -> Result<Self> {
        let d = total_dim(&factors);
        Self::new(factors, Matrix::identity(d, d))
    }

    pub fn zeros(factors: Vec<SystemLabel>) -> Result<Self> {
        let d = total_dim(&factors);
        Self::new(factors, Matrix::zeros(d, d))
    }

    pub fn diagonal(factors: Vec<SystemLabel>, diag: &[f64]) -> Result<Self> {
        let d = total_dim(&factors);
        if diag.len() != d {
            return composition(format!("diagonal has {} entries, need {}", diag.len(), d));
        }
        let mut m = Matrix::zeros(d, d);
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        Self::new(factors, m)
    }

    /// `|i><i|` on a single factor.
    pub fn basis_projector(label: SystemLabel, index: usize) -> Result<Self> {
        if index >= label.dim {
            return composition(format!("basis index {} out of range for {}", index, label));
        }
        let mut m = Matrix::zeros(label.dim, label.dim);
        m[(index, index)] = C64::new(1.0, 0.0);
        Self::new(vec![label], m)
    }

    /// Normalized `|psi><psi|`.
    pub fn pure(factors: Vec<SystemLabel>, amplitudes: &[C64]) -> Result<Self> {
        let d = total_dim(&factors);
        if amplitudes.len() != d {
            return composition(format!("state vector has {} entries, need {}", amplitudes.len(), d));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return domain("zero state vector");
        }
        let v = nalgebra::DVector::from_iterator(d, amplitudes.iter().map(|a| a / norm));
        Self::new(factors, &v * v.adjoint())
    }

    pub fn factors(&self) -> &[SystemLabel] {
        &self.factors
    }

    pub fn names(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn has_factor(&self, name: &str) -> bool {
        self.factors.iter().any(|f| f.name == name)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix {
        self.mat
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            factors: self.factors.clone(),
            mat: self.mat.adjoint(),
        }
    }

    pub fn hermiticity_residual(&self) -> f64 {
        (&self.mat - self.mat.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_residual() <= HERMITICITY_TOL * self.max_abs().max(f64::MIN_POSITIVE)
    }

    pub fn unitarity_residual(&self) -> f64 {
        let d = self.dim();
        (self.mat.adjoint() * &self.mat - Matrix::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_residual() <= UNITARITY_TOL
    }

    fn same_layout(&self, other: &Operator, what: &str) -> Result<()> {
        if self.factors != other.factors {
            return composition(format!(
                "{what}: factor layouts differ ({:?} vs {:?})",
                self.names(),
                other.names()
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        self.same_layout(other, "add")?;
        Ok(Self {
            factors: self.factors.clone(),
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &Operator) -> Result<Self> {
        self.same_layout(other, "sub")?;
        Ok(Self {
            factors: self.factors.clone(),
            mat: &self.mat - &other.mat,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            factors: self.factors.clone(),
            mat: &self.mat * C64::new(s, 0.0),
        }
    }

    pub fn mul(&self, other: &Operator) -> Result<Self> {
        self.same_layout(other, "mul")?;
        Ok(Self {
            factors: self.factors.clone(),
            mat: &self.mat * &other.mat,
        })
    }

    /// `u * self * u^dag`.
    pub fn conjugate_by(&self, u: &Operator) -> Result<Self> {
        self.same_layout(u, "conjugate_by")?;
        Ok(Self {
            factors: self.factors.clone(),
            mat: &u.mat * &self.mat * u.mat.adjoint(),
        })
    }

    /// `Re Tr[self * h]`, with `h` permuted onto this layout when needed.
    pub fn expectation(&self, h: &Operator) -> Result<f64> {
        let h = if h.factors == self.factors {
            h.clone()
        } else {
            h.permuted(&self.names())?
        };
        self.same_layout(&h, "expectation")?;
        // Tr[A B] = sum_ij A_ij B_ji
        let mut acc = C64::new(0.0, 0.0);
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                acc += self.mat[(i, j)] * h.mat[(j, i)];
            }
        }
        Ok(acc.re)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        let other = if other.factors == self.factors {
            other.clone()
        } else {
            other.permuted(&self.names())?
        };
        Ok((&self.mat - &other.mat)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }

    pub fn tensor(&self, other: &Operator) -> Result<Self> {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        check_factors(&factors)?;
        Ok(Self {
            factors,
            mat: self.mat.kronecker(&other.mat),
        })
    }

    fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return composition(format!("label {n} requested twice"));
            }
            match self.factors.iter().position(|f| f.name == *n) {
                Some(p) => out.push(p),
                None => {
                    return composition(format!("unknown label {n} (factors {:?})", self.names()))
                }
            }
        }
        Ok(out)
    }

    /// Trace out every factor not in `keep`. The result keeps the original
    /// factor order regardless of the order of `keep`.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self> {
        let mut keep_idx = self.positions(keep)?;
        keep_idx.sort_unstable();
        if keep_idx.len() == self.factors.len() {
            return Ok(self.clone());
        }
        let trace_idx: Vec<usize> = (0..self.factors.len())
            .filter(|i| !keep_idx.contains(i))
            .collect();
        let st = strides(&self.factors);
        let ko = offsets(&self.factors, &st, &keep_idx);
        let to = offsets(&self.factors, &st, &trace_idx);
        let d = ko.len();
        let mut out = Matrix::zeros(d, d);
        for (a, &ka) in ko.iter().enumerate() {
            for (b, &kb) in ko.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &t in &to {
                    acc += self.mat[(ka + t, kb + t)];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(Self {
            factors: keep_idx.iter().map(|&i| self.factors[i].clone()).collect(),
            mat: out,
        })
    }

    /// Reorder factors; `order` must name every factor exactly once.
    pub fn permuted(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.factors.len() {
            return composition(format!(
                "permutation {:?} does not cover factors {:?}",
                order,
                self.names()
            ));
        }
        let idx = self.positions(order)?;
        if idx.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let st = strides(&self.factors);
        let off = offsets(&self.factors, &st, &idx);
        let d = off.len();
        let mat = Matrix::from_fn(d, d, |a, b| self.mat[(off[a], off[b])]);
        Ok(Self {
            factors: idx.iter().map(|&i| self.factors[i].clone()).collect(),
            mat,
        })
    }

    /// `self ⊗ 1` on the factors of `full` not present here, arranged in the
    /// order of `full`.
    pub fn embedded(&self, full: &[SystemLabel]) -> Result<Self> {
        for f in &self.factors {
            if !full.contains(f) {
                return composition(format!("factor {f} not present in target layout"));
            }
        }
        let rest: Vec<SystemLabel> = full
            .iter()
            .filter(|f| !self.factors.contains(f))
            .cloned()
            .collect();
        let big = if rest.is_empty() {
            self.clone()
        } else {
            self.tensor(&Operator::identity(rest)?)?
        };
        let order: Vec<&str> = full.iter().map(|f| f.name.as_str()).collect();
        big.permuted(&order)
    }

    /// Rename a factor without touching the entries.
    pub fn renamed(&self, from: &str, to: &str) -> Result<Self> {
        let mut factors = self.factors.clone();
        match factors.iter_mut().find(|f| f.name == from) {
            Some(f) => f.name = to.to_string(),
            None => return composition(format!("unknown label {from}")),
        }
        check_factors(&factors)?;
        Ok(Self {
            factors,
            mat: self.mat.clone(),
        })
    }

    /// Same entries, new labels (dimensions must agree factor by factor).
    pub fn relabeled(&self, factors: Vec<SystemLabel>) -> Result<Self> {
        if factors.len() != self.factors.len()
            || factors.iter().zip(&self.factors).any(|(a, b)| a.dim != b.dim)
        {
            return composition("relabel changes dimensions");
        }
        Self::new(factors, self.mat.clone())
    }
}

/// Eigenpairs of a Hermitian operator, eigenvalues ascending; column `i` of
/// `vectors` belongs to `values[i]`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> Matrix {
        self.map(|x| x)
    }

    /// `V f(diag) V^dag`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..d {
            let fx = C64::new(f(self.values[j]), 0.0);
            for i in 0..d {
                scaled[(i, j)] *= fx;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

pub fn hermitian_eig(h: &Operator) -> Result<HermitianEigen> {
    if !h.is_hermitian() {
        return domain(format!(
            "operator is not Hermitian (residual {:.3e})",
            h.hermiticity_residual()
        ));
    }
    Ok(hermitian_eig_matrix(h.matrix()))
}

pub(crate) fn hermitian_eig_matrix(m: &Matrix) -> HermitianEigen {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let d = sym.nrows();
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// Eigenvalues only, ascending.
pub fn spectrum(h: &Operator) -> Result<Vec<f64>> {
    Ok(hermitian_eig(h)?.values)
}

pub fn spectral_fn(h: &Operator, f: impl Fn(f64) -> f64) -> Result<Operator> {
    let eig = hermitian_eig(h)?;
    Operator::new(h.factors().to_vec(), eig.map(f))
}

pub fn matrix_exp(h: &Operator) -> Result<Operator> {
    spectral_fn(h, f64::exp)
}

/// Square root of a positive operator; eigenvalues down to `-NEGATIVITY_TOL`
/// are clipped to zero.
pub fn matrix_sqrt(h: &Operator) -> Result<Operator> {
    let eig = hermitian_eig(h)?;
    if let Some(&min) = eig.values.first() {
        if min < -NEGATIVITY_TOL {
            return domain(format!("square root of operator with eigenvalue {min:.3e}"));
        }
    }
    Operator::new(h.factors().to_vec(), eig.map(|x| x.max(0.0).sqrt()))
}

/// `ln` on the support (eigenvalues above `SUPPORT_CUTOFF`), zero elsewhere.
pub fn matrix_log_on_support(h: &Operator) -> Result<Operator> {
    spectral_fn(h, |x| if x > SUPPORT_CUTOFF { x.ln() } else { 0.0 })
}

/// Positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator(Operator);

impl DensityOperator {
    pub fn new(op: Operator) -> Result<Self> {
        if !op.is_hermitian() {
            return domain(format!(
                "state is not Hermitian (residual {:.3e})",
                op.hermiticity_residual()
            ));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return domain(format!("state has trace {tr}"));
        }
        let min = hermitian_eig_matrix(op.matrix()).values[0];
        if min < -NEGATIVITY_TOL {
            return domain(format!("state has eigenvalue {min:.3e}"));
        }
        Ok(Self(op))
    }

    /// Clip negative eigenvalues to zero and renormalize. The flag reports
    /// whether anything was changed.
    pub fn clipped(op: Operator) -> Result<(Self, bool)> {
        if !op.is_hermitian() {
            return domain("cannot clip a non-Hermitian operator");
        }
        let eig = hermitian_eig_matrix(op.matrix());
        let clipped = eig.values.iter().any(|&x| x < 0.0);
        let total: f64 = eig.values.iter().map(|&x| x.max(0.0)).sum();
        if total <= 0.0 {
            return domain("no positive spectrum to renormalize");
        }
        let renorm = (total - 1.0).abs() > 0.0;
        let m = eig.map(|x| x.max(0.0) / total);
        Ok((Self(Operator::new(op.factors().to_vec(), m)?), clipped || renorm))
    }

    /// Wraps an operator already known to be a state (internal fast path).
    pub(crate) fn trusted(op: Operator) -> Self {
        Self(op)
    }

    pub fn maximally_mixed(factors: Vec<SystemLabel>) -> Result<Self> {
        let d = total_dim(&factors);
        Ok(Self(Operator::identity(factors)?.scale(1.0 / d as f64)))
    }

    pub fn pure(factors: Vec<SystemLabel>, amplitudes: &[C64]) -> Result<Self> {
        Ok(Self(Operator::pure(factors, amplitudes)?))
    }

    pub fn basis_state(label: SystemLabel, index: usize) -> Result<Self> {
        Ok(Self(Operator::basis_projector(label, index)?))
    }

    pub fn operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn tensor(&self, other: &DensityOperator) -> Result<Self> {
        Ok(Self(self.0.tensor(&other.0)?))
    }

    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self> {
        Ok(Self(self.0.partial_trace(keep)?))
    }

    pub fn purity(&self) -> f64 {
        self.0.expectation(&self.0).unwrap_or(f64::NAN)
    }
}

impl Deref for DensityOperator {
    type Target = Operator;
    fn deref(&self) -> &Operator {
        &self.0
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Single-factor matrix from real row-major entries.
pub fn real_matrix(rows: &[&[f64]]) -> Matrix {
    let n = rows.len();
    Matrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0))
}
