//! Shared spectral data for one work protocol.
//!
//! Everything the averages, the trajectory table and the CGFs need is a
//! function of three population vectors held in exact log form plus one
//! transition-probability matrix:
//!
//! * `log_p0[i]`  — initial thermal populations, basis |i_0> of H_0;
//! * `log_ptau[j]` — final thermal populations, basis |j_tau> of H_tau;
//! * `log_ptilde[i]` — Gibbs populations of the dephased Hamiltonian
//!   D_{rho_tau}(H_tau), carried on |psi_i> = U|i_0>;
//! * `overlap[(i, j)] = |<j_tau|U|i_0>|^2`.
//!
//! Degenerate clusters make the labels ambiguous, so the bases are refined:
//! within a degenerate cluster of rho_tau the |psi_i> are rotated to
//! diagonalize the H_tau block (defining eps_tilde), and within a degenerate
//! cluster of H_tau the |j_tau> are rotated to diagonalize the rho_tau block
//! (defining the q marginals). Averages are unchanged by these rotations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::log_populations;
use crate::splitting::WorkProtocol;
use crate::stable::log_sum_exp;

const DOUBLY_STOCHASTIC_TOL: f64 = 1e-9;

pub(crate) struct ProtocolSpectra {
    pub dim: usize,
    pub beta: f64,
    pub eps_tilde: Vec<f64>,
    pub log_p0: Vec<f64>,
    pub log_ptau: Vec<f64>,
    pub log_ptilde: Vec<f64>,
    pub log_q: Vec<f64>,
    /// overlap[(i, j)] = |<j_tau|psi_i>|^2 (doubly stochastic)
    pub overlap: DMatrix<f64>,
    /// refined |psi_i> = U|i_0>, columns
    pub psi: DMatrix<Complex64>,
    /// refined final measurement basis, columns
    pub v_tau: DMatrix<Complex64>,
}

/// Rotates the columns `range` of `basis` by the eigenvectors of the
/// corresponding block of `m` (given in the basis columns), returning the
/// block eigenvalues.
fn refine_block(
    basis: &mut DMatrix<Complex64>,
    m: &DMatrix<Complex64>,
    range: std::ops::Range<usize>,
) -> Vec<f64> {
    let k = range.len();
    let n = basis.nrows();
    let cols = basis.columns(range.start, k).into_owned();
    let block_full = cols.adjoint() * m * &cols;
    let block = (&block_full + block_full.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = block.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut rot = DMatrix::zeros(k, k);
    let mut vals = Vec::with_capacity(k);
    for (c, &idx) in order.iter().enumerate() {
        rot.set_column(c, &eig.eigenvectors.column(idx));
        vals.push(eig.eigenvalues[idx]);
    }
    let rotated = cols * rot;
    for c in 0..k {
        for r in 0..n {
            basis[(r, range.start + c)] = rotated[(r, c)];
        }
    }
    vals
}

impl ProtocolSpectra {
    pub fn build(p: &WorkProtocol) -> Result<Self> {
        let dim = p.dim();
        let beta = p.beta;
        let s0 = p.h0.spectral();
        let s_tau = p.h_tau.spectral();
        let eps0 = s0.eigenvalues().to_vec();
        let eps_tau = s_tau.eigenvalues().to_vec();
        let (log_p0, _ln_z0) = log_populations(&eps0, beta);
        let (log_ptau, _ln_z_tau) = log_populations(&eps_tau, beta);

        // psi_i = U |i_0>, refined so that H_tau is diagonal inside each
        // degenerate cluster of rho_tau (same clusters as H_0)
        let mut psi = p.u.matrix() * s0.vectors();
        let h_tau_mat = p.h_tau.matrix();
        let mut eps_tilde = vec![0.0; dim];
        for range in s0.cluster_ranges() {
            if range.len() == 1 {
                let i = range.start;
                let col = psi.column(i);
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..dim {
                    let mut hv = Complex64::new(0.0, 0.0);
                    for c in 0..dim {
                        hv += h_tau_mat[(r, c)] * col[c];
                    }
                    acc += col[r].conj() * hv;
                }
                eps_tilde[i] = acc.re;
            } else {
                let vals = refine_block(&mut psi, h_tau_mat, range.clone());
                eps_tilde[range].copy_from_slice(&vals);
            }
        }
        let (log_ptilde, _ln_z_tilde) = log_populations(&eps_tilde, beta);

        // final measurement basis, refined so rho_tau is diagonal inside each
        // degenerate cluster of H_tau
        let mut v_tau = s_tau.vectors().clone();
        let p0: Vec<f64> = log_p0.iter().map(|&l| l.exp()).collect();
        let rho_tau = {
            let mut scaled = psi.clone();
            for j in 0..dim {
                let w = Complex64::new(p0[j], 0.0);
                for i in 0..dim {
                    scaled[(i, j)] *= w;
                }
            }
            &scaled * psi.adjoint()
        };
        for range in s_tau.cluster_ranges() {
            if range.len() > 1 {
                refine_block(&mut v_tau, &rho_tau, range);
            }
        }

        // overlap and marginals, with ln q via log-sum-exp for exactness
        let t = v_tau.adjoint() * &psi; // t[(j, i)] = <j_tau|psi_i>
        let mut overlap = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                overlap[(i, j)] = t[(j, i)].norm_sqr();
            }
        }
        let mut dev = 0.0_f64;
        for k in 0..dim {
            let row: f64 = (0..dim).map(|j| overlap[(k, j)]).sum();
            let col: f64 = (0..dim).map(|i| overlap[(i, k)]).sum();
            dev = dev.max((row - 1.0).abs()).max((col - 1.0).abs());
        }
        if dev > DOUBLY_STOCHASTIC_TOL {
            return Err(Error::DoublyStochastic { deviation: dev });
        }
        let mut log_q = vec![f64::NEG_INFINITY; dim];
        let mut terms = Vec::with_capacity(dim);
        for j in 0..dim {
            terms.clear();
            for i in 0..dim {
                let w = overlap[(i, j)];
                if w > 0.0 {
                    terms.push(log_p0[i] + w.ln());
                }
            }
            log_q[j] = log_sum_exp(&terms);
        }

        Ok(ProtocolSpectra {
            dim,
            beta,
            eps_tilde,
            log_p0,
            log_ptau,
            log_ptilde,
            log_q,
            overlap,
            psi,
            v_tau,
        })
    }

    pub fn p0(&self) -> Vec<f64> {
        self.log_p0.iter().map(|&l| l.exp()).collect()
    }

    pub fn ptau(&self) -> Vec<f64> {
        self.log_ptau.iter().map(|&l| l.exp()).collect()
    }

    pub fn ptilde(&self) -> Vec<f64> {
        self.log_ptilde.iter().map(|&l| l.exp()).collect()
    }

    pub fn q(&self) -> Vec<f64> {
        self.log_q.iter().map(|&l| l.exp()).collect()
    }

    /// P_F[(i, j)] = overlap * p0_i.
    pub fn joint(&self) -> DMatrix<f64> {
        let p0 = self.p0();
        let mut joint = self.overlap.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                joint[(i, j)] *= p0[i];
            }
        }
        joint
    }
}
