//! Seeded random matrices. Every generator takes an explicit RNG; nothing
//! here touches global state.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::operator::{Matrix, C64};

pub type DemonRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> DemonRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for sample `index` of a run seeded with `master`. SplitMix64 mixing
/// keeps neighbouring indices decorrelated.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    // fill row by row so the draw order does not depend on storage layout
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = gaussian_c64(rng);
        }
    }
    m
}

/// Haar unitary: QR of a Ginibre matrix with the phases of `diag(R)` folded
/// back into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Matrix {
    let qr = ginibre(d, d, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `big x small` isometry: first `small` columns of a Haar unitary.
pub fn haar_isometry<R: Rng + ?Sized>(big: usize, small: usize, rng: &mut R) -> Matrix {
    let u = haar_unitary(big, rng);
    u.columns(0, small).into_owned()
}

/// `G G^dag / Tr` with `G` a `d x rank` Ginibre matrix.
pub fn random_density_matrix<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> Matrix {
    let g = ginibre(d, rank.max(1), rng);
    let rho = &g * g.adjoint();
    let tr = rho.trace().re;
    rho / C64::new(tr, 0.0)
}

pub fn random_pure_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<C64> {
    let v: Vec<C64> = (0..d).map(|_| gaussian_c64(rng)).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

/// Random Hermitian matrix `(G + G^dag)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Matrix {
    let g = ginibre(d, d, rng);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// Random partition of `0..n` into `parts` nonempty groups.
pub fn random_partition<R: Rng + ?Sized>(n: usize, parts: usize, rng: &mut R) -> Vec<Vec<usize>> {
    assert!(parts >= 1 && n >= parts);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut groups: Vec<Vec<usize>> = idx[..parts].iter().map(|&i| vec![i]).collect();
    for &i in &idx[parts..] {
        let g = rng.random_range(0..parts);
        groups[g].push(i);
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        let a = haar_unitary(4, &mut rng_from_seed(7));
        let b = haar_unitary(4, &mut rng_from_seed(7));
        assert_eq!(a, b);
        let c = haar_unitary(4, &mut rng_from_seed(8));
        assert_ne!(a, c);
    }

    #[test]
    fn haar_is_unitary() {
        let u = haar_unitary(5, &mut rng_from_seed(1));
        let r = (u.adjoint() * &u - Matrix::identity(5, 5)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(r < 1e-12);
    }

    #[test]
    fn density_has_unit_trace() {
        for s in 0..20 {
            let rho = random_density_matrix(3, 2, &mut rng_from_seed(s));
            assert!((rho.trace().re - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(s.len(), 1000);
    }
}
