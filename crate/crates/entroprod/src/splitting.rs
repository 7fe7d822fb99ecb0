//! Reference states and the two splittings of the average entropy
//! production.
//!
//! For a protocol (H_0, H_tau, U, beta) the entropy production
//! Sigma = S(rho_tau || rho_tau_th) splits as Gamma_cl + Gamma_qu through the
//! dephased state D_{H_tau}(rho_tau), and as Lambda_cl + Lambda_qu through
//! the Gibbs state of the dephased Hamiltonian D_{rho_tau}(H_tau).
//!
//! Every quantity is computed twice: a primary log-space route on spectral
//! data, and an independent dense free-energy route. A mismatch above 1e-7
//! is a hard error rather than a warning; the redundant formulas act as a
//! built-in oracle.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::{
    dephase_density, von_neumann_entropy, DensityMatrix, HermitianMatrix, UnitaryMatrix,
    SUPPORT_TOL,
};
use crate::spectra::ProtocolSpectra;

/// Hard-error threshold for the two-route cross-check.
pub const CROSS_CHECK_TOL: f64 = 1e-7;

/// A unitary work protocol: initial and final Hamiltonians, the drive
/// unitary, and the inverse temperature of the initial thermal state.
#[derive(Debug, Clone)]
pub struct WorkProtocol {
    pub h0: HermitianMatrix,
    pub h_tau: HermitianMatrix,
    pub u: UnitaryMatrix,
    pub beta: f64,
}

impl WorkProtocol {
    pub fn new(
        h0: HermitianMatrix,
        h_tau: HermitianMatrix,
        u: UnitaryMatrix,
        beta: f64,
    ) -> Result<Self> {
        if h0.dim() != h_tau.dim() {
            return Err(Error::DimensionMismatch {
                left: h0.dim(),
                right: h_tau.dim(),
            });
        }
        if h0.dim() != u.dim() {
            return Err(Error::DimensionMismatch {
                left: h0.dim(),
                right: u.dim(),
            });
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidBeta { beta });
        }
        Ok(WorkProtocol { h0, h_tau, u, beta })
    }

    /// Quench protocol: U = 1.
    pub fn quench(h0: HermitianMatrix, h_tau: HermitianMatrix, beta: f64) -> Result<Self> {
        let dim = h0.dim();
        Self::new(h0, h_tau, UnitaryMatrix::identity(dim), beta)
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }
}

/// The four states of the splitting construction plus the dephased
/// Hamiltonian.
#[derive(Debug, Clone)]
pub struct ReferenceStates {
    /// U rho_0^th U^dag
    pub rho_tau: DensityMatrix,
    /// Gibbs state of H_tau
    pub rho_tau_th: DensityMatrix,
    /// rho_tau dephased in the eigenbasis of H_tau
    pub rho_tau_dephased: DensityMatrix,
    /// Gibbs state of the dephased Hamiltonian
    pub rho_tilde_th: DensityMatrix,
    /// D_{rho_tau}(H_tau)
    pub h_dephased: HermitianMatrix,
}

/// The entropy production and both of its splittings, in nats.
/// Components can be `+inf` when the reference state is numerically pure.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AverageSplit {
    pub sigma: f64,
    pub gamma_cl: f64,
    pub gamma_qu: f64,
    pub lambda_cl: f64,
    pub lambda_qu: f64,
}

/// Builds the reference states of the splitting construction.
pub fn reference_states(p: &WorkProtocol) -> Result<ReferenceStates> {
    let sp = ProtocolSpectra::build(p)?;
    Ok(ReferenceStates {
        rho_tau: DensityMatrix::from_populations(&sp.psi, &sp.p0()),
        rho_tau_th: DensityMatrix::from_populations(&sp.v_tau, &sp.ptau()),
        rho_tau_dephased: DensityMatrix::from_populations(&sp.v_tau, &sp.q()),
        rho_tilde_th: DensityMatrix::from_populations(&sp.psi, &sp.ptilde()),
        h_dephased: HermitianMatrix::new({
            let n = sp.dim;
            let mut scaled = sp.psi.clone();
            for j in 0..n {
                let e = num_complex::Complex64::new(sp.eps_tilde[j], 0.0);
                for i in 0..n {
                    scaled[(i, j)] *= e;
                }
            }
            &scaled * sp.psi.adjoint()
        })
        .expect("spectral reconstruction is Hermitian"),
    })
}

/// F(rho) = tr(H_tau rho) - S(rho)/beta. Undefined at beta = 0.
pub fn nonequilibrium_free_energy(
    rho: &DensityMatrix,
    h_tau: &HermitianMatrix,
    beta: f64,
) -> Result<f64> {
    if beta <= 0.0 {
        return Err(Error::BetaZero {
            what: "non-equilibrium free energy",
        });
    }
    if rho.dim() != h_tau.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: h_tau.dim(),
        });
    }
    let prod = h_tau.matrix() * rho.matrix();
    let energy: f64 = (0..rho.dim()).map(|i| prod[(i, i)].re).sum();
    Ok(energy - von_neumann_entropy(rho) / beta)
}

struct RawAverages {
    sigma: f64,
    gamma_cl: f64,
    gamma_qu: f64,
    lambda_cl: f64,
    lambda_qu: f64,
    sigma_divergent: bool,
    lambda_cl_divergent: bool,
}

fn raw_averages(sp: &ProtocolSpectra) -> RawAverages {
    let n = sp.dim;
    let p0 = sp.p0();
    let ptau = sp.ptau();
    let ptilde = sp.ptilde();
    let q = sp.q();

    // mean of ln p^tau_j over the final marginal, as a joint sum
    let mut mean_log_ptau = 0.0;
    for i in 0..n {
        if p0[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            let w = sp.overlap[(i, j)] * p0[i];
            if w > 0.0 {
                mean_log_ptau += w * sp.log_ptau[j];
            }
        }
    }
    let neg_entropy_rho: f64 = (0..n)
        .filter(|&i| p0[i] > 0.0)
        .map(|i| p0[i] * sp.log_p0[i])
        .sum();
    let neg_entropy_deph: f64 = (0..n)
        .filter(|&j| q[j] > 0.0)
        .map(|j| q[j] * sp.log_q[j])
        .sum();

    let sigma = neg_entropy_rho - mean_log_ptau;
    let gamma_qu = neg_entropy_rho - neg_entropy_deph;
    let gamma_cl: f64 = (0..n)
        .filter(|&j| q[j] > 0.0)
        .map(|j| q[j] * (sp.log_q[j] - sp.log_ptau[j]))
        .sum();
    let lambda_cl: f64 = (0..n)
        .filter(|&i| p0[i] > 0.0)
        .map(|i| p0[i] * (sp.log_p0[i] - sp.log_ptilde[i]))
        .sum();
    let mean_log_ptilde: f64 = (0..n)
        .filter(|&i| p0[i] > 0.0)
        .map(|i| p0[i] * sp.log_ptilde[i])
        .sum();
    let lambda_qu = mean_log_ptilde - mean_log_ptau;

    // support-tolerance divergence flags: populations below SUPPORT_TOL count
    // as zero support, and weight sitting outside the support diverges
    let sigma_divergent = (0..n).any(|j| q[j] > SUPPORT_TOL && ptau[j] < SUPPORT_TOL);
    let lambda_cl_divergent = (0..n).any(|i| p0[i] > SUPPORT_TOL && ptilde[i] < SUPPORT_TOL);

    RawAverages {
        sigma,
        gamma_cl,
        gamma_qu,
        lambda_cl,
        lambda_qu,
        sigma_divergent,
        lambda_cl_divergent,
    }
}

fn cross_check(what: &'static str, primary: f64, secondary: f64) -> Result<()> {
    let delta = (primary - secondary).abs();
    if delta > CROSS_CHECK_TOL {
        return Err(Error::CrossCheck {
            what,
            delta,
            tol: CROSS_CHECK_TOL,
        });
    }
    Ok(())
}

/// Dense-route free energies of the four reference states; None at beta = 0
/// or when any flag marks a divergent quantity.
fn free_energy_route(p: &WorkProtocol, sp: &ProtocolSpectra) -> Option<(f64, f64, f64, f64)> {
    if p.beta <= 0.0 {
        return None;
    }
    let rho_tau = DensityMatrix::from_populations(&sp.psi, &sp.p0());
    let rho_th = DensityMatrix::from_populations(&sp.v_tau, &sp.ptau());
    let rho_tilde = DensityMatrix::from_populations(&sp.psi, &sp.ptilde());
    let s_tau = p.h_tau.spectral();
    let deph = dephase_density(&rho_tau, &s_tau).ok()?;
    let f_tau = nonequilibrium_free_energy(&rho_tau, &p.h_tau, p.beta).ok()?;
    let f_th = nonequilibrium_free_energy(&rho_th, &p.h_tau, p.beta).ok()?;
    let f_deph = nonequilibrium_free_energy(&deph, &p.h_tau, p.beta).ok()?;
    let f_tilde = nonequilibrium_free_energy(&rho_tilde, &p.h_tau, p.beta).ok()?;
    Some((f_tau, f_th, f_deph, f_tilde))
}

/// Entropy production Sigma = S(rho_tau || rho_tau_th), cross-checked
/// against beta (F(rho_tau) - F(rho_tau_th)).
pub fn sigma(p: &WorkProtocol) -> Result<f64> {
    let sp = ProtocolSpectra::build(p)?;
    let raw = raw_averages(&sp);
    if raw.sigma_divergent {
        return Ok(f64::INFINITY);
    }
    if let Some((f_tau, f_th, _, _)) = free_energy_route(p, &sp) {
        cross_check("sigma", raw.sigma, p.beta * (f_tau - f_th))?;
    }
    Ok(raw.sigma)
}

/// The population/coherence split (Gamma_cl, Gamma_qu).
/// Gamma_cl may be +inf at numerically pure reference states.
pub fn gamma_split(p: &WorkProtocol) -> Result<(f64, f64)> {
    let sp = ProtocolSpectra::build(p)?;
    let raw = raw_averages(&sp);
    if raw.sigma_divergent {
        return Ok((f64::INFINITY, raw.gamma_qu));
    }
    if let Some((f_tau, f_th, f_deph, _)) = free_energy_route(p, &sp) {
        cross_check("gamma_qu", raw.gamma_qu, p.beta * (f_tau - f_deph))?;
        cross_check("gamma_cl", raw.gamma_cl, p.beta * (f_deph - f_th))?;
    }
    Ok((raw.gamma_cl, raw.gamma_qu))
}

/// The dephased-Hamiltonian split (Lambda_cl, Lambda_qu).
/// Lambda_qu >= 0 is asserted (it vanishes iff [H_tau, rho_tau] = 0).
pub fn lambda_split(p: &WorkProtocol) -> Result<(f64, f64)> {
    let sp = ProtocolSpectra::build(p)?;
    let raw = raw_averages(&sp);
    let lambda_cl = if raw.lambda_cl_divergent {
        f64::INFINITY
    } else {
        raw.lambda_cl
    };
    let lambda_qu = if raw.sigma_divergent && !raw.lambda_cl_divergent {
        f64::INFINITY
    } else {
        raw.lambda_qu
    };
    if lambda_qu.is_finite() && lambda_qu < -1e-10 {
        return Err(Error::InvariantViolation(format!(
            "lambda_qu = {lambda_qu:.3e} is negative beyond tolerance"
        )));
    }
    if !raw.sigma_divergent && !raw.lambda_cl_divergent {
        if let Some((f_tau, f_th, _, f_tilde)) = free_energy_route(p, &sp) {
            cross_check("lambda_cl", raw.lambda_cl, p.beta * (f_tau - f_tilde))?;
            cross_check("lambda_qu", raw.lambda_qu, p.beta * (f_tilde - f_th))?;
        }
    }
    Ok((lambda_cl, lambda_qu))
}

/// All five quantities from one spectral pass.
pub fn average_split(p: &WorkProtocol) -> Result<AverageSplit> {
    let sp = ProtocolSpectra::build(p)?;
    let raw = raw_averages(&sp);
    let mut out = AverageSplit {
        sigma: raw.sigma,
        gamma_cl: raw.gamma_cl,
        gamma_qu: raw.gamma_qu,
        lambda_cl: raw.lambda_cl,
        lambda_qu: raw.lambda_qu,
    };
    if raw.sigma_divergent {
        out.sigma = f64::INFINITY;
        out.gamma_cl = f64::INFINITY;
        if !raw.lambda_cl_divergent {
            out.lambda_qu = f64::INFINITY;
        }
    }
    if raw.lambda_cl_divergent {
        out.lambda_cl = f64::INFINITY;
    }
    Ok(out)
}

pub(crate) fn average_split_from_spectra(sp: &ProtocolSpectra) -> AverageSplit {
    let raw = raw_averages(sp);
    AverageSplit {
        sigma: if raw.sigma_divergent {
            f64::INFINITY
        } else {
            raw.sigma
        },
        gamma_cl: if raw.sigma_divergent {
            f64::INFINITY
        } else {
            raw.gamma_cl
        },
        gamma_qu: raw.gamma_qu,
        lambda_cl: if raw.lambda_cl_divergent {
            f64::INFINITY
        } else {
            raw.lambda_cl
        },
        lambda_qu: if raw.sigma_divergent && !raw.lambda_cl_divergent {
            f64::INFINITY
        } else {
            raw.lambda_qu
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{qubit_closed_forms, qubit_quench_protocol, QubitQuenchParams};
    use crate::operators::gibbs_state;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn qubit(beta_omega: f64, theta: f64) -> WorkProtocol {
        qubit_quench_protocol(&QubitQuenchParams {
            omega: 1.0,
            theta,
            beta: beta_omega,
        })
    }

    #[test]
    fn trivial_protocol_everything_zero() {
        let h = HermitianMatrix::from_diagonal(&[-1.0, 0.3, 2.0]);
        let p = WorkProtocol::quench(h.clone(), h, 1.7).unwrap();
        let s = average_split(&p).unwrap();
        assert_abs_diff_eq!(s.sigma, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma_cl, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma_qu, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.lambda_cl, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.lambda_qu, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn commuting_drive_zero_splits() {
        // [U, H0] = 0 and H_tau = H0: rho_tau = rho_0, all splits vanish
        let h = HermitianMatrix::from_diagonal(&[-1.0, 0.5]);
        let u = crate::operators::evolution_unitary(&h, 2.3);
        let p = WorkProtocol::new(h.clone(), h, u, 0.9).unwrap();
        let s = average_split(&p).unwrap();
        assert_abs_diff_eq!(s.sigma, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma_qu, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.lambda_qu, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn beta_zero_gives_zero_sigma() {
        let p = qubit(0.0, 1.1);
        assert_abs_diff_eq!(sigma(&p).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn qubit_quench_closed_form_sigma() {
        let p = qubit(1.0, 1.1);
        let s = sigma(&p).unwrap();
        let t = 1.0_f64.tanh();
        let expected = 2.0 * t * t.atanh() * (0.55_f64).sin().powi(2);
        assert_relative_eq!(s, expected, epsilon = 1e-12);
        assert_relative_eq!(s, 0.41614, epsilon = 1e-4);
    }

    #[test]
    fn qubit_dephased_hamiltonian() {
        // theta-quench: D_{rho_tau}(H_tau) = omega cos(theta) sigma_z
        let theta = 1.1;
        let p = qubit(0.8, theta);
        let refs = reference_states(&p).unwrap();
        let spec = refs.h_dephased.spectral();
        assert_abs_diff_eq!(spec.eigenvalues()[0], -theta.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(spec.eigenvalues()[1], theta.cos(), epsilon = 1e-12);
        // commutation and energy-conservation invariants of the states
        let c = refs.rho_tilde_th.matrix() * refs.rho_tau.matrix()
            - refs.rho_tau.matrix() * refs.rho_tilde_th.matrix();
        assert!(c.norm() < 1e-9);
        let e1 = (p.h_tau.matrix() * refs.rho_tau_dephased.matrix())
            .diagonal()
            .iter()
            .map(|z| z.re)
            .sum::<f64>();
        let e2 = (p.h_tau.matrix() * refs.rho_tau.matrix())
            .diagonal()
            .iter()
            .map(|z| z.re)
            .sum::<f64>();
        assert_abs_diff_eq!(e1, e2, epsilon = 1e-9);
    }

    #[test]
    fn identity_protocol_reference_states_coincide() {
        let h = HermitianMatrix::from_diagonal(&[-0.4, 0.9, 1.2]);
        let p = WorkProtocol::quench(h.clone(), h.clone(), 1.3).unwrap();
        let refs = reference_states(&p).unwrap();
        let g = gibbs_state(&h, 1.3).unwrap();
        for m in [
            &refs.rho_tau,
            &refs.rho_tau_th,
            &refs.rho_tau_dephased,
            &refs.rho_tilde_th,
        ] {
            assert!((m.matrix() - g.rho.matrix()).norm() < 1e-11);
        }
    }

    #[test]
    fn incoherent_protocol_zero_gamma_qu() {
        use crate::random::random_commuting_protocol;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let p = random_commuting_protocol(&mut rng, 5, 2.0);
        let (_, gqu) = gamma_split(&p).unwrap();
        assert_abs_diff_eq!(gqu, 0.0, epsilon = 1e-11);
        let (_, lqu) = lambda_split(&p).unwrap();
        assert_abs_diff_eq!(lqu, 0.0, epsilon = 1e-11);
    }

    #[test]
    fn qubit_split_closed_forms() {
        for &(bw, theta) in &[(0.3, 0.7), (1.0, 1.1), (5.0, 1.1), (2.0, 2.4)] {
            let p = qubit(bw, theta);
            let cf = qubit_closed_forms(&QubitQuenchParams {
                omega: 1.0,
                theta,
                beta: bw,
            });
            let s = average_split(&p).unwrap();
            assert_relative_eq!(s.sigma, cf.sigma, epsilon = 1e-11, max_relative = 1e-11);
            assert_relative_eq!(s.gamma_qu, cf.gamma_qu, epsilon = 1e-11, max_relative = 1e-11);
            assert_relative_eq!(s.lambda_qu, cf.lambda_qu, epsilon = 1e-11, max_relative = 1e-11);
        }
    }

    #[test]
    fn low_temperature_gamma_cl_dominates_qubit() {
        // Fig. 1(c) regime: classical contribution dominates at large beta
        let p = qubit(12.0, 1.1);
        let (gcl, gqu) = gamma_split(&p).unwrap();
        assert!(gcl.is_finite());
        assert!(gcl > 3.0 * gqu);
    }

    #[test]
    fn free_energy_identities() {
        let h = HermitianMatrix::from_diagonal(&[0.0, 1.0, 2.5]);
        let beta = 1.4;
        let g = gibbs_state(&h, beta).unwrap();
        // thermal state: F = -ln Z / beta
        let f = nonequilibrium_free_energy(&g.rho, &h, beta).unwrap();
        assert_relative_eq!(f, -g.ln_z / beta, epsilon = 1e-11);
        // maximally mixed: tr H / d - ln d / beta
        let mixed = DensityMatrix::maximally_mixed(3);
        let f = nonequilibrium_free_energy(&mixed, &h, beta).unwrap();
        assert_relative_eq!(f, 3.5 / 3.0 - 3.0_f64.ln() / beta, epsilon = 1e-12);
        // pure eigenstate: F = eps_j
        let pure = DensityMatrix::from_populations(
            &nalgebra::DMatrix::identity(3, 3),
            &[0.0, 1.0, 0.0],
        );
        let f = nonequilibrium_free_energy(&pure, &h, beta).unwrap();
        assert_relative_eq!(f, 1.0, epsilon = 1e-12);
        assert!(nonequilibrium_free_energy(&mixed, &h, 0.0).is_err());
    }

    #[test]
    fn divergent_gamma_cl_reports_infinity() {
        // beta so large that the excited reference population drops below the
        // support threshold while the coherent protocol keeps weight there
        let p = qubit(16.0, 1.1);
        let (gcl, gqu) = gamma_split(&p).unwrap();
        assert!(gcl.is_infinite());
        assert!(gqu.is_finite());
        let s = sigma(&p).unwrap();
        assert!(s.is_infinite());
    }
}
