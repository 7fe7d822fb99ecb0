//! Seeded random ensembles for property suites: GUE-style Hermitian
//! matrices, Haar-ish unitaries from QR, and random work protocols.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::operators::{HermitianMatrix, DensityMatrix, UnitaryMatrix};
use crate::splitting::WorkProtocol;

fn gaussian_complex<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// GUE-normalized random Hermitian matrix with spectral scale `scale`.
pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> HermitianMatrix {
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = gaussian_complex(rng);
        }
    }
    let h = (&m + m.adjoint()) * Complex64::new(0.5 * scale / (dim as f64).sqrt(), 0.0);
    HermitianMatrix::new(h).expect("symmetrized matrix is Hermitian")
}

/// Haar-distributed (up to column phases) random unitary via QR.
pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> UnitaryMatrix {
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = gaussian_complex(rng);
        }
    }
    let qr = m.qr();
    UnitaryMatrix::new(qr.q()).expect("Q factor is unitary")
}

/// Random full-rank density matrix from a random thermal-like spectrum.
pub fn random_density<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
    let u = random_unitary(rng, dim);
    let mut pops: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = pops.iter().sum();
    for p in &mut pops {
        *p /= total;
    }
    DensityMatrix::from_populations(u.matrix(), &pops)
}

/// Random work protocol: GUE Hamiltonians of unit scale, Haar unitary.
pub fn random_protocol<R: Rng>(rng: &mut R, dim: usize, beta: f64) -> WorkProtocol {
    let h0 = random_hermitian(rng, dim, 1.0);
    let h_tau = random_hermitian(rng, dim, 1.0);
    let u = random_unitary(rng, dim);
    WorkProtocol::new(h0, h_tau, u, beta).expect("dimensions agree")
}

/// Random protocol with [H_tau, rho_tau] = 0: H_tau shares the eigenbasis of
/// H0 (with fresh eigenvalues) and U = 1, so rho_tau = rho_0 commutes with
/// H_tau exactly.
pub fn random_commuting_protocol<R: Rng>(rng: &mut R, dim: usize, beta: f64) -> WorkProtocol {
    let h0 = random_hermitian(rng, dim, 1.0);
    let spec = h0.spectral();
    let fresh: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let diag = HermitianMatrix::from_diagonal(&fresh);
    let m = spec.vectors() * diag.matrix() * spec.vectors().adjoint();
    let h_tau = HermitianMatrix::new(m).expect("conjugated diagonal is Hermitian");
    let u = UnitaryMatrix::identity(dim);
    WorkProtocol::new(h0, h_tau, u, beta).expect("dimensions agree")
}
