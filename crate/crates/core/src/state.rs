//! States stored as a tensor product of independent blocks.
//!
//! Gates merge only the blocks they touch and swaps are relabelings, so a
//! long chain of fresh bath registers costs one small block per register.

use crate::error::{composition, Result};
use crate::operator::{Operator, SystemLabel};
use crate::qinfo::von_neumann_entropy;
use crate::thermo::eq_free_energy;

#[derive(Clone, Debug)]
pub enum Gate {
    Unitary(Operator),
    Swap(String, String),
}

impl Gate {
    pub fn labels(&self) -> Vec<&str> {
        match self {
            Gate::Unitary(u) => u.names(),
            Gate::Swap(a, b) => vec![a.as_str(), b.as_str()],
        }
    }
}

/// Ordered gate list; empty means identity.
#[derive(Clone, Debug, Default)]
pub struct Circuit {
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn single(u: Operator) -> Self {
        Self {
            gates: vec![Gate::Unitary(u)],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn then(mut self, g: Gate) -> Self {
        self.gates.push(g);
        self
    }

    pub fn labels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for g in &self.gates {
            for l in g.labels() {
                if !out.contains(&l) {
                    out.push(l);
                }
            }
        }
        out
    }

    /// Dense unitary on `layout`. Only used for small layouts (tests,
    /// export of circuits as a single matrix).
    pub fn dense(&self, layout: &[SystemLabel]) -> Result<Operator> {
        let mut acc = Operator::identity(layout.to_vec())?;
        for g in &self.gates {
            let gm = match g {
                Gate::Unitary(u) => u.embedded(layout)?,
                Gate::Swap(a, b) => swap_operator(layout, a, b)?,
            };
            acc = gm.mul(&acc)?;
        }
        Ok(acc)
    }
}

/// Permutation matrix exchanging two equal-dimension factors of `layout`.
pub fn swap_operator(layout: &[SystemLabel], a: &str, b: &str) -> Result<Operator> {
    let id = Operator::identity(layout.to_vec())?;
    let ia = layout.iter().position(|f| f.name == a);
    let ib = layout.iter().position(|f| f.name == b);
    let (Some(ia), Some(ib)) = (ia, ib) else {
        return composition(format!("swap {a}<->{b} outside layout"));
    };
    if layout[ia].dim != layout[ib].dim {
        return composition(format!("swap {a}<->{b} between different dimensions"));
    }
    let d = id.dim();
    let dims: Vec<usize> = layout.iter().map(|f| f.dim).collect();
    let mut m = crate::operator::Matrix::zeros(d, d);
    let mut digits = vec![0usize; dims.len()];
    for j in 0..d {
        let mut r = j;
        for (p, &dp) in dims.iter().enumerate().rev() {
            digits[p] = r % dp;
            r /= dp;
        }
        digits.swap(ia, ib);
        let i = digits.iter().zip(&dims).fold(0, |acc, (&x, &dp)| acc * dp + x);
        m[(i, j)] = crate::operator::C64::new(1.0, 0.0);
    }
    Operator::new(layout.to_vec(), m)
}

#[derive(Clone, Debug)]
pub struct ProductState {
    blocks: Vec<Operator>,
}

impl ProductState {
    pub fn new(blocks: Vec<Operator>) -> Result<Self> {
        let mut seen: Vec<&str> = Vec::new();
        for b in &blocks {
            for n in b.names() {
                if seen.contains(&n) {
                    return composition(format!("label {n} in two blocks"));
                }
                seen.push(n);
            }
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Operator] {
        &self.blocks
    }

    pub fn labels(&self) -> Vec<SystemLabel> {
        self.blocks.iter().flat_map(|b| b.factors().iter().cloned()).collect()
    }

    pub fn has(&self, name: &str) -> bool {
        self.blocks.iter().any(|b| b.has_factor(name))
    }

    pub fn push(&mut self, block: Operator) -> Result<()> {
        for n in block.names() {
            if self.has(n) {
                return composition(format!("label {n} already present"));
            }
        }
        self.blocks.push(block);
        Ok(())
    }

    /// Drops every factor whose name satisfies `pred`.
    pub fn trace_out(&self, pred: impl Fn(&str) -> bool) -> Result<Self> {
        let mut blocks = Vec::new();
        for b in &self.blocks {
            let keep: Vec<&str> = b.names().into_iter().filter(|n| !pred(n)).collect();
            if keep.is_empty() {
                continue;
            }
            blocks.push(b.partial_trace(&keep)?);
        }
        Ok(Self { blocks })
    }

    fn check_known(&self, names: &[&str]) -> Result<()> {
        for n in names {
            if !self.has(n) {
                return composition(format!("unknown label {n}"));
            }
        }
        Ok(())
    }

    /// Per-block marginals restricted to `names`, skipping untouched blocks.
    fn pieces(&self, names: &[&str]) -> Result<Vec<Operator>> {
        self.check_known(names)?;
        let mut out = Vec::new();
        for b in &self.blocks {
            let keep: Vec<&str> = b.names().into_iter().filter(|n| names.contains(n)).collect();
            if !keep.is_empty() {
                out.push(b.partial_trace(&keep)?);
            }
        }
        Ok(out)
    }

    /// Dense marginal on `names`, factors in the order given.
    pub fn marginal(&self, names: &[&str]) -> Result<Operator> {
        let pieces = self.pieces(names)?;
        let mut it = pieces.into_iter();
        let Some(mut acc) = it.next() else {
            return composition("empty marginal");
        };
        for p in it {
            acc = acc.tensor(&p)?;
        }
        acc.permuted(names)
    }

    pub fn entropy(&self, names: &[&str]) -> Result<f64> {
        Ok(self.pieces(names)?.iter().map(von_neumann_entropy).sum())
    }

    /// `S(X) + S(Y) - S(XY)`.
    pub fn mutual_information(&self, x: &[&str], y: &[&str]) -> Result<f64> {
        if x.is_empty() || y.is_empty() {
            return Ok(0.0);
        }
        let xy: Vec<&str> = x.iter().chain(y).copied().collect();
        Ok(self.entropy(x)? + self.entropy(y)? - self.entropy(&xy)?)
    }

    /// `sum_terms Tr[rho H_term]`.
    pub fn energy(&self, terms: &[Operator]) -> Result<f64> {
        let mut e = 0.0;
        for t in terms {
            e += self.marginal(&t.names())?.expectation(t)?;
        }
        Ok(e)
    }

    /// `D(rho_X || gamma_X)` where `X` is the union of the labels of
    /// `terms` and `gamma_X` the product of their Gibbs states, evaluated as
    /// `beta (E - F_eq) - S(rho_X)` so that tiny Gibbs weights never reach
    /// the support cutoff.
    pub fn relative_entropy_to_gibbs(&self, terms: &[Operator], beta: f64) -> Result<f64> {
        let names: Vec<&str> = terms.iter().flat_map(|t| t.names()).collect();
        let s = self.entropy(&names)?;
        let mut f = 0.0;
        for t in terms {
            f += eq_free_energy(t, beta)?;
        }
        Ok((beta * (self.energy(terms)? - f) - s).max(0.0))
    }

    fn block_index(&self, name: &str) -> Result<usize> {
        match self.blocks.iter().position(|b| b.has_factor(name)) {
            Some(i) => Ok(i),
            None => composition(format!("unknown label {name}")),
        }
    }

    pub fn apply_unitary(&mut self, u: &Operator) -> Result<()> {
        let mut idx: Vec<usize> = Vec::new();
        for n in u.names() {
            let i = self.block_index(n)?;
            if !idx.contains(&i) {
                idx.push(i);
            }
        }
        idx.sort_unstable();
        let mut merged = self.blocks[idx[0]].clone();
        for &i in &idx[1..] {
            merged = merged.tensor(&self.blocks[i])?;
        }
        let uf = u.embedded(merged.factors())?;
        let out = merged.conjugate_by(&uf)?;
        for &i in idx.iter().rev() {
            self.blocks.remove(i);
        }
        self.blocks.insert(idx[0], out);
        Ok(())
    }

    pub fn apply_swap(&mut self, a: &str, b: &str) -> Result<()> {
        let ia = self.block_index(a)?;
        let ib = self.block_index(b)?;
        let da = self.blocks[ia].factors().iter().find(|f| f.name == a).map(|f| f.dim);
        let db = self.blocks[ib].factors().iter().find(|f| f.name == b).map(|f| f.dim);
        if da != db {
            return composition(format!("swap {a}<->{b} between different dimensions"));
        }
        let tmp = "\u{0}swap";
        self.blocks[ia] = self.blocks[ia].renamed(a, tmp)?;
        self.blocks[ib] = self.blocks[ib].renamed(b, a)?;
        self.blocks[ia] = self.blocks[ia].renamed(tmp, b)?;
        Ok(())
    }

    pub fn apply_circuit(&mut self, c: &Circuit) -> Result<()> {
        for g in &c.gates {
            match g {
                Gate::Unitary(u) => self.apply_unitary(u)?,
                Gate::Swap(a, b) => self.apply_swap(a, b)?,
            }
        }
        Ok(())
    }
}
