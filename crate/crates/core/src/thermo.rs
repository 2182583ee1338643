//! Gibbs states, energies and free energies. Units with `k_B = 1`.

use crate::error::{composition, domain, Result};
use crate::operator::{hermitian_eig, DensityOperator, Operator};
use crate::qinfo::{relative_entropy, von_neumann_entropy};

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return domain(format!("inverse temperature must be positive, got {beta}"));
    }
    Ok(())
}

/// `exp(-beta H) / Z`, evaluated with the ground energy shifted out.
pub fn gibbs_state(h: &Operator, beta: f64) -> Result<DensityOperator> {
    check_beta(beta)?;
    let eig = hermitian_eig(h)?;
    let e0 = eig.values[0];
    let z: f64 = eig.values.iter().map(|&e| (-beta * (e - e0)).exp()).sum();
    let m = eig.map(|e| (-beta * (e - e0)).exp() / z);
    Ok(DensityOperator::trusted(Operator::new(h.factors().to_vec(), m)?))
}

/// `-ln Z / beta`.
pub fn eq_free_energy(h: &Operator, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let eig = hermitian_eig(h)?;
    let e0 = eig.values[0];
    let z: f64 = eig.values.iter().map(|&e| (-beta * (e - e0)).exp()).sum();
    Ok(e0 - z.ln() / beta)
}

/// Hamiltonian whose Gibbs state at `beta` is the full-rank state `tau`:
/// `-ln(tau) / beta`.
pub fn thermal_hamiltonian(tau: &Operator, beta: f64) -> Result<Operator> {
    check_beta(beta)?;
    let eig = hermitian_eig(tau)?;
    if eig.values[0] <= 0.0 {
        return domain("thermal Hamiltonian needs a full-rank state");
    }
    Operator::new(tau.factors().to_vec(), eig.map(|x| -x.ln() / beta))
}

/// `(rho; H; beta)`.
#[derive(Clone, Debug)]
pub struct ThermoSystem {
    pub rho: Operator,
    pub h: Operator,
    pub beta: f64,
}

impl ThermoSystem {
    pub fn new(rho: Operator, h: Operator, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let h = if h.factors() == rho.factors() {
            h
        } else {
            h.permuted(&rho.names())?
        };
        if h.factors() != rho.factors() {
            return composition("state and Hamiltonian live on different systems");
        }
        Ok(Self { rho, h, beta })
    }

    pub fn energy(&self) -> f64 {
        internal_energy(&self.rho, &self.h).expect("layouts checked")
    }

    pub fn entropy(&self) -> f64 {
        von_neumann_entropy(&self.rho)
    }

    pub fn free_energy(&self) -> f64 {
        self.energy() - self.entropy() / self.beta
    }

    /// `F_eq + D(rho || gamma) / beta`, the second route to the free energy.
    pub fn free_energy_via_divergence(&self) -> Result<f64> {
        let gamma = gibbs_state(&self.h, self.beta)?;
        Ok(eq_free_energy(&self.h, self.beta)? + relative_entropy(&self.rho, &gamma)? / self.beta)
    }
}

/// `Tr[rho H]`.
pub fn internal_energy(rho: &Operator, h: &Operator) -> Result<f64> {
    rho.expectation(h)
}

/// `E - S / beta`.
pub fn noneq_free_energy(rho: &Operator, h: &Operator, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(internal_energy(rho, h)? - von_neumann_entropy(rho) / beta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Energy,
    FreeEnergy,
    Entropy,
}

/// `x(to) - x(from)`.
pub fn delta(x: Quantity, from: &ThermoSystem, to: &ThermoSystem) -> f64 {
    let eval = |s: &ThermoSystem| match x {
        Quantity::Energy => s.energy(),
        Quantity::FreeEnergy => s.free_energy(),
        Quantity::Entropy => s.entropy(),
    };
    eval(to) - eval(from)
}
