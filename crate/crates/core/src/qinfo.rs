//! Entropic functionals in nats.

use crate::error::{composition, Result};
use crate::operator::{hermitian_eig, hermitian_eig_matrix, Operator, SUPPORT_CUTOFF};

/// Residual trace of `rho` outside `supp(sigma)` above which the support
/// condition counts as violated.
pub const SUPPORT_RESIDUAL_TOL: f64 = 1e-10;

/// `-sum x ln x` over the entries above the support cutoff.
pub fn entropy_of_spectrum(values: &[f64]) -> f64 {
    -values
        .iter()
        .filter(|&&x| x > SUPPORT_CUTOFF)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Von Neumann entropy. Accepts any Hermitian operator; the caller is
/// responsible for passing a state.
pub fn von_neumann_entropy(rho: &Operator) -> f64 {
    let eig = hermitian_eig_matrix(rho.matrix());
    entropy_of_spectrum(&eig.values).max(0.0)
}

/// Umegaki relative entropy `Tr[rho (ln rho - ln sigma)]`, or `+inf` when
/// `supp(rho)` is not contained in `supp(sigma)`.
pub fn relative_entropy(rho: &Operator, sigma: &Operator) -> Result<f64> {
    let sigma = if sigma.factors() == rho.factors() {
        sigma.clone()
    } else {
        sigma.permuted(&rho.names())?
    };
    if sigma.factors() != rho.factors() {
        return composition("relative entropy of operators on different systems");
    }
    let es = hermitian_eig(&sigma)?;
    // projector onto the complement of supp(sigma)
    let outside = es.map(|x| if x > SUPPORT_CUTOFF { 0.0 } else { 1.0 });
    let leak = (rho.matrix() * &outside).trace().re;
    if leak > SUPPORT_RESIDUAL_TOL {
        return Ok(f64::INFINITY);
    }
    let er = hermitian_eig(rho)?;
    let neg_s = -entropy_of_spectrum(&er.values);
    let log_sigma = es.map(|x| if x > SUPPORT_CUTOFF { x.ln() } else { 0.0 });
    let cross = (rho.matrix() * log_sigma).trace().re;
    Ok(neg_s - cross)
}

fn labels_disjoint(a: &[&str], b: &[&str]) -> Result<()> {
    if let Some(x) = a.iter().find(|x| b.contains(x)) {
        return composition(format!("label {x} appears in both parts"));
    }
    Ok(())
}

fn joined<'a>(parts: &[&[&'a str]]) -> Vec<&'a str> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Entropy of the marginal on `part`.
pub fn marginal_entropy(rho: &Operator, part: &[&str]) -> Result<f64> {
    Ok(von_neumann_entropy(&rho.partial_trace(part)?))
}

/// `S(A) + S(B) - S(AB)`. The parts need not cover every factor; the rest
/// is traced out.
pub fn mutual_information(rho: &Operator, a: &[&str], b: &[&str]) -> Result<f64> {
    labels_disjoint(a, b)?;
    let ab = joined(&[a, b]);
    let rho_ab = rho.partial_trace(&ab)?;
    Ok(marginal_entropy(&rho_ab, a)? + marginal_entropy(&rho_ab, b)? - von_neumann_entropy(&rho_ab))
}

/// `S(AB) - S(B)`.
pub fn conditional_entropy(rho: &Operator, a: &[&str], b: &[&str]) -> Result<f64> {
    labels_disjoint(a, b)?;
    let ab = joined(&[a, b]);
    let rho_ab = rho.partial_trace(&ab)?;
    Ok(von_neumann_entropy(&rho_ab) - marginal_entropy(&rho_ab, b)?)
}

/// `I(A:C|B) = S(AB) + S(CB) - S(ACB) - S(B)`.
pub fn conditional_mutual_information(
    rho: &Operator,
    a: &[&str],
    c: &[&str],
    b: &[&str],
) -> Result<f64> {
    labels_disjoint(a, c)?;
    labels_disjoint(a, b)?;
    labels_disjoint(c, b)?;
    let all = joined(&[a, c, b]);
    let rho_acb = rho.partial_trace(&all)?;
    let s_ab = marginal_entropy(&rho_acb, &joined(&[a, b]))?;
    let s_cb = marginal_entropy(&rho_acb, &joined(&[c, b]))?;
    let s_b = marginal_entropy(&rho_acb, b)?;
    Ok(s_ab + s_cb - von_neumann_entropy(&rho_acb) - s_b)
}

/// `-sum p ln p` with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    0.0 - p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}
