//! Analytic transverse-field Ising backend.
//!
//! After Jordan-Wigner and Bogoliubov transformations the chain at field g
//! becomes free fermions with single-particle energies
//! eps_k(g) = sqrt((g - cos k)^2 + sin^2 k), and a field quench
//! g0 -> g0 + dg couples only the mode pairs +-k. All splitting quantities
//! reduce to one-dimensional k-integrals (thermodynamic limit) or sums over
//! k = (2n+1) pi / N (finite even N, boundary terms dropped).
//!
//! The per-mode closed forms are evaluated in log-stable form so that beta
//! in the hundreds is safe. An independent oracle builds the explicit
//! 4-dimensional +-k pair-mode Hamiltonians and runs the generic splitting
//! engine on them.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::HermitianMatrix;
use crate::quadrature::GaussLegendre;
use crate::splitting::{average_split, AverageSplit, WorkProtocol};
use crate::stable::{ln_1p_sinh2, ln_cosh, ln_tanh_ratio_pm};

/// Chain size: the thermodynamic limit (per-site densities) or a finite even
/// ring (extensive sums over the (2n+1)pi/N mode grid).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemSize {
    /// Per-site densities from momentum integrals.
    Thermodynamic,
    /// Extensive quantities from the finite mode sum; N must be even, >= 4.
    Finite(usize),
}

/// Quench parameters for the transverse-field Ising chain (J = 1 units).
#[derive(Debug, Clone, Copy)]
pub struct TfimParams {
    pub g0: f64,
    pub delta_g: f64,
    pub beta: f64,
    pub size: SystemSize,
    pub quad_nodes: usize,
}

impl TfimParams {
    pub fn thermodynamic(g0: f64, delta_g: f64, beta: f64) -> Self {
        TfimParams {
            g0,
            delta_g,
            beta,
            size: SystemSize::Thermodynamic,
            quad_nodes: DEFAULT_QUAD_NODES,
        }
    }

    pub fn finite(n: usize, g0: f64, delta_g: f64, beta: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "finite TFIM size N = {n} must be even and at least 4"
            )));
        }
        Ok(TfimParams {
            g0,
            delta_g,
            beta,
            size: SystemSize::Finite(n),
            quad_nodes: DEFAULT_QUAD_NODES,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidBeta { beta: self.beta });
        }
        if let SystemSize::Finite(n) = self.size {
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidParameter(format!(
                    "finite TFIM size N = {n} must be even and at least 4"
                )));
            }
        }
        Ok(())
    }
}

/// Default Gauss-Legendre order; the momentum integrand sharpens near the
/// gap minimum at criticality, where the integral is panel-split.
pub const DEFAULT_QUAD_NODES: usize = 512;

/// Per-mode spectral data of the quench.
#[derive(Debug, Clone, Copy)]
pub struct ModeData {
    pub k: f64,
    /// eps_k(g0)
    pub eps0: f64,
    /// eps_k(g0 + dg)
    pub eps_tau: f64,
    /// eps_k^0 + dg cos(theta_k) = eps_k^tau cos(Delta_k)
    pub eps_tilde: f64,
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub cos_delta: f64,
    pub sin_delta: f64,
}

/// Single-particle energy eps_k(g).
pub fn dispersion(g: f64, k: f64) -> f64 {
    ((g - k.cos()).powi(2) + k.sin().powi(2)).sqrt()
}

/// Bogoliubov and mixing angles plus the pre/post-quench energies at
/// momentum k in (0, pi).
pub fn mode_data(params: &TfimParams, k: f64) -> ModeData {
    let g0 = params.g0;
    let g_tau = g0 + params.delta_g;
    let eps0 = dispersion(g0, k);
    let eps_tau = dispersion(g_tau, k);
    let cos_theta = (g0 - k.cos()) / eps0;
    let sin_theta = k.sin() / eps0;
    let eps_tilde = eps0 + params.delta_g * cos_theta;
    let cos_delta = eps_tilde / eps_tau;
    let sin_delta = -params.delta_g * k.sin() / (eps_tau * eps0);
    ModeData {
        k,
        eps0,
        eps_tau,
        eps_tilde,
        cos_theta,
        sin_theta,
        cos_delta,
        sin_delta,
    }
}

/// (1 + cos Delta, 1 - cos Delta) without the cancellation that forming
/// them from a rounded cos Delta near +-1 would cause: the small one comes
/// from eps_tau -+ eps_tilde = dg^2 sin^2(theta)/(eps_tau +- eps_tilde).
fn cos_delta_pm(m: &ModeData, delta_g: f64) -> (f64, f64) {
    let dg_s = delta_g * m.sin_theta;
    if m.eps_tilde >= 0.0 {
        let one_minus = dg_s * dg_s / (m.eps_tau * (m.eps_tau + m.eps_tilde));
        ((m.eps_tau + m.eps_tilde) / m.eps_tau, one_minus)
    } else {
        let one_plus = dg_s * dg_s / (m.eps_tau * (m.eps_tau - m.eps_tilde));
        (one_plus, (m.eps_tau - m.eps_tilde) / m.eps_tau)
    }
}

/// Per-mode contributions of the +-k pair to the five quantities (the
/// integrands of the momentum integrals, factor 2 included).
pub fn mode_split(params: &TfimParams, k: f64) -> AverageSplit {
    let m = mode_data(params, k);
    let b = params.beta;
    let lambda_cl = 2.0
        * (ln_cosh(b * m.eps_tilde) - ln_cosh(b * m.eps0)
            + b * (m.eps0 - m.eps_tilde) * (b * m.eps0).tanh());
    let lambda_qu = 2.0 * (ln_cosh(b * m.eps_tau) - ln_cosh(b * m.eps_tilde));
    let sigma = lambda_cl + lambda_qu;

    // population/coherence split of the same pair mode; x = 2 beta eps_k^0
    let x = 2.0 * b * m.eps0;
    let t0 = (b * m.eps0).tanh();
    // ln[(1 + tanh x)/(1 - tanh x)] = 2x exactly
    let log_ratio_0 = 2.0 * x;
    let (one_plus, one_minus) = cos_delta_pm(&m, params.delta_g);
    let log_ratio_0_cd = ln_tanh_ratio_pm(x, one_plus, one_minus);
    let log_ratio_tau = 2.0 * (2.0 * b * m.eps_tau);
    // cosh(2 b eps0) / (4 cosh^2(b eps0)) in log-stable form
    let prefactor = 0.25 * (ln_cosh(x) - 2.0 * ln_cosh(b * m.eps0)).exp();
    let coherence_log = ln_1p_sinh2(x, m.sin_delta);
    let gamma_qu =
        0.5 * t0 * (log_ratio_0 - m.cos_delta * log_ratio_0_cd) - prefactor * coherence_log;
    let gamma_cl = 2.0 * (ln_cosh(b * m.eps_tau) - ln_cosh(b * m.eps0))
        - 0.5 * t0 * m.cos_delta * (log_ratio_tau - log_ratio_0_cd)
        + prefactor * coherence_log;

    AverageSplit {
        sigma,
        gamma_cl,
        gamma_qu,
        lambda_cl,
        lambda_qu,
    }
}

fn accumulate(params: &TfimParams, f: impl Fn(f64) -> f64) -> Result<f64> {
    params.validate()?;
    match params.size {
        SystemSize::Finite(n) => {
            let mut acc = 0.0;
            for m in 0..n / 2 {
                let k = (2 * m + 1) as f64 * std::f64::consts::PI / n as f64;
                acc += f(k);
            }
            Ok(acc)
        }
        SystemSize::Thermodynamic => {
            let quad = GaussLegendre::new(params.quad_nodes.max(8));
            let pi = std::f64::consts::PI;
            // near criticality the integrand peaks where eps_k^0 is minimal;
            // split the interval there
            let total = if (0.9..=1.1).contains(&params.g0) {
                let k_star = params.g0.clamp(-1.0, 1.0).acos();
                if k_star > 1e-6 && k_star < pi - 1e-6 {
                    quad.integrate(0.0, k_star, &f) + quad.integrate(k_star, pi, &f)
                } else {
                    quad.integrate(0.0, pi, &f)
                }
            } else {
                quad.integrate(0.0, pi, &f)
            };
            Ok(total / (2.0 * pi))
        }
    }
}

/// The full dephased-Hamiltonian split of the quench. Thermodynamic size
/// returns per-site densities; finite size returns the extensive sum.
#[derive(Debug, Clone, Copy)]
pub struct TfimSplit {
    pub lambda_cl: f64,
    pub lambda_qu: f64,
    pub sigma: f64,
}

pub fn lambda_split_tfim(params: &TfimParams) -> Result<TfimSplit> {
    let lambda_cl = accumulate(params, |k| mode_split(params, k).lambda_cl)?;
    let lambda_qu = accumulate(params, |k| mode_split(params, k).lambda_qu)?;
    Ok(TfimSplit {
        lambda_cl,
        lambda_qu,
        sigma: lambda_cl + lambda_qu,
    })
}

/// The population/coherence split of the quench, same conventions.
pub fn gamma_split_tfim(params: &TfimParams) -> Result<(f64, f64)> {
    let gamma_cl = accumulate(params, |k| mode_split(params, k).gamma_cl)?;
    let gamma_qu = accumulate(params, |k| mode_split(params, k).gamma_qu)?;
    Ok((gamma_cl, gamma_qu))
}

/// Leading-order (infinitesimal-quench) split:
///
///   Lambda_cl = beta^2 dg^2 Int dk/2pi sech^2(beta eps_k^0) cos^2 theta_k
///   Lambda_qu = beta^2 dg^2 Int dk/2pi [tanh(beta eps_k^0)/(beta eps_k^0)] sin^2 theta_k
pub fn infinitesimal_tfim(params: &TfimParams) -> Result<(f64, f64)> {
    let b = params.beta;
    let dg2 = params.delta_g * params.delta_g;
    let lambda_cl = accumulate(params, |k| {
        let m = mode_data(params, k);
        let sech = 1.0 / (b * m.eps0).cosh();
        b * b * dg2 * sech * sech * m.cos_theta * m.cos_theta
    })?;
    let lambda_qu = accumulate(params, |k| {
        let m = mode_data(params, k);
        let ratio = if b * m.eps0 < 1e-12 {
            1.0
        } else {
            (b * m.eps0).tanh() / (b * m.eps0)
        };
        b * b * dg2 * ratio * m.sin_theta * m.sin_theta
    })?;
    Ok((lambda_cl, lambda_qu))
}

/// Builds the explicit 4-dimensional +-k pair-mode quench in the
/// |n_{-k} n_k> occupation basis and runs the generic splitting engine on
/// it. Must agree with [`mode_split`] to 1e-10; this is the independent
/// check of the closed forms.
pub fn pair_mode_oracle(params: &TfimParams, k: f64) -> Result<AverageSplit> {
    params.validate()?;
    if !(k > 0.0 && k < std::f64::consts::PI) {
        return Err(Error::InvalidParameter(format!(
            "pair-mode momentum k = {k} must lie in (0, pi)"
        )));
    }
    let m = mode_data(params, k);
    // basis order |00>, |01>, |10>, |11>
    let h0 = HermitianMatrix::from_diagonal(&[-2.0 * m.eps0, 0.0, 0.0, 2.0 * m.eps0]);
    let mut h_tau = DMatrix::<Complex64>::zeros(4, 4);
    h_tau[(0, 0)] = Complex64::new(-2.0 * m.eps_tilde, 0.0);
    h_tau[(3, 3)] = Complex64::new(2.0 * m.eps_tilde, 0.0);
    // the coherent part couples only the empty and doubly occupied states
    let c = Complex64::new(2.0 * params.delta_g * m.sin_theta, 0.0);
    h_tau[(0, 3)] = c;
    h_tau[(3, 0)] = c;
    let protocol = WorkProtocol::quench(h0, HermitianMatrix::new(h_tau)?, params.beta)?;
    average_split(&protocol)
}

/// Extensive finite-N error |sum_N - N * per-site integral| for one
/// quantity, used to measure the finite-size convergence rate.
pub fn finite_size_error(params: &TfimParams, n: usize, pick: impl Fn(&TfimSplit) -> f64) -> Result<f64> {
    let mut thermo = *params;
    thermo.size = SystemSize::Thermodynamic;
    let per_site = pick(&lambda_split_tfim(&thermo)?);
    let mut finite = *params;
    finite.size = SystemSize::Finite(n);
    let extensive = pick(&lambda_split_tfim(&finite)?);
    Ok((extensive - n as f64 * per_site).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mode_data_critical_point() {
        // at g0 = 1, eps -> 0 and cos theta -> sin(k/2) -> 0 as k -> 0
        let p = TfimParams::thermodynamic(1.0, 0.0, 1.0);
        let m = mode_data(&p, 1e-4);
        assert!(m.eps0 < 2e-4);
        assert_relative_eq!(m.cos_theta, (0.5e-4_f64).sin(), max_relative = 1e-4);
    }

    #[test]
    fn mode_data_zero_quench() {
        let p = TfimParams::thermodynamic(0.7, 0.0, 2.0);
        let m = mode_data(&p, 1.3);
        assert_abs_diff_eq!(m.sin_delta, 0.0, epsilon = 1e-15);
        assert_relative_eq!(m.cos_delta, 1.0, epsilon = 1e-14);
        assert_relative_eq!(m.eps_tilde, m.eps0, epsilon = 1e-14);
        assert_relative_eq!(m.eps_tau, m.eps0, epsilon = 1e-14);
    }

    #[test]
    fn mode_data_free_fermion_point() {
        // g0 = 0, k = pi/2: eps = 1, cos theta = -cos(pi/2) = 0, sin theta = 1
        let p = TfimParams::thermodynamic(0.0, 0.0, 1.0);
        let m = mode_data(&p, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(m.eps0, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.cos_theta, 0.0, epsilon = 1e-14);
        assert_relative_eq!(m.sin_theta, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eps_tilde_double_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let p = TfimParams::thermodynamic(
                rng.gen_range(0.2..1.8),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(0.0..10.0),
            );
            let k = rng.gen_range(1e-3..std::f64::consts::PI - 1e-3);
            let m = mode_data(&p, k);
            assert_abs_diff_eq!(m.eps_tilde, m.eps_tau * m.cos_delta, epsilon = 1e-12);
            assert_abs_diff_eq!(
                m.eps_tilde,
                m.eps0 + p.delta_g * m.cos_theta,
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                m.sin_delta,
                -p.delta_g * k.sin() / (m.eps_tau * m.eps0),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                m.cos_delta * m.cos_delta + m.sin_delta * m.sin_delta,
                1.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn zero_quench_and_infinite_temperature_vanish() {
        let p = TfimParams::thermodynamic(0.75, 0.0, 3.0);
        let s = lambda_split_tfim(&p).unwrap();
        assert_abs_diff_eq!(s.sigma, 0.0, epsilon = 1e-13);
        let (gcl, gqu) = gamma_split_tfim(&p).unwrap();
        assert_abs_diff_eq!(gcl, 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(gqu, 0.0, epsilon = 1e-13);

        let p = TfimParams::thermodynamic(0.75, 0.05, 0.0);
        let s = lambda_split_tfim(&p).unwrap();
        assert_abs_diff_eq!(s.sigma, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn pair_mode_oracle_matches_closed_forms() {
        // beta capped so pair-mode populations stay above the support
        // threshold where the averaging engine reports +inf by convention
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..30 {
            let p = TfimParams::thermodynamic(
                rng.gen_range(0.3..1.7),
                rng.gen_range(-0.2..0.2),
                rng.gen_range(0.05..2.0),
            );
            let k = rng.gen_range(0.02..std::f64::consts::PI - 0.02);
            let oracle = pair_mode_oracle(&p, k).unwrap();
            let closed = mode_split(&p, k);
            assert_abs_diff_eq!(oracle.sigma, closed.sigma, epsilon = 1e-10);
            assert_abs_diff_eq!(oracle.gamma_cl, closed.gamma_cl, epsilon = 1e-10);
            assert_abs_diff_eq!(oracle.gamma_qu, closed.gamma_qu, epsilon = 1e-10);
            assert_abs_diff_eq!(oracle.lambda_cl, closed.lambda_cl, epsilon = 1e-10);
            assert_abs_diff_eq!(oracle.lambda_qu, closed.lambda_qu, epsilon = 1e-10);
        }
    }

    #[test]
    fn pair_mode_coherent_structure() {
        // the coherent perturbation couples only |00> and |11>
        let p = TfimParams::thermodynamic(0.8, 0.1, 1.0);
        let k = 1.1;
        let m = mode_data(&p, k);
        // off-diagonal element of H_tau between the occupation-basis extremes
        let expected = 2.0 * p.delta_g * m.sin_theta;
        assert!(expected.abs() > 1e-3);
        let oracle = pair_mode_oracle(&p, k).unwrap();
        assert!(oracle.lambda_qu > 0.0);
    }

    #[test]
    fn per_mode_additivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let p = TfimParams::thermodynamic(
                rng.gen_range(0.3..1.7),
                rng.gen_range(-0.2..0.2),
                rng.gen_range(0.0..40.0),
            );
            let k = rng.gen_range(1e-3..std::f64::consts::PI - 1e-3);
            let s = mode_split(&p, k);
            assert_abs_diff_eq!(s.gamma_cl + s.gamma_qu, s.sigma, epsilon = 1e-10);
            assert_abs_diff_eq!(s.lambda_cl + s.lambda_qu, s.sigma, epsilon = 1e-10);
        }
    }

    #[test]
    fn infinitesimal_matches_full_split_cubically() {
        let base = 0.02;
        let err_at = |dg: f64| -> (f64, f64) {
            let p = TfimParams::thermodynamic(0.75, dg, 2.0);
            let full = lambda_split_tfim(&p).unwrap();
            let (lcl, lqu) = infinitesimal_tfim(&p).unwrap();
            ((full.lambda_cl - lcl).abs(), (full.lambda_qu - lqu).abs())
        };
        let (c1, q1) = err_at(base);
        let (c2, q2) = err_at(base / 2.0);
        assert!((5.0..12.0).contains(&(c1 / c2)), "lambda_cl ratio {}", c1 / c2);
        assert!((5.0..12.0).contains(&(q1 / q2)), "lambda_qu ratio {}", q1 / q2);
    }

    #[test]
    fn infinitesimal_satisfies_fdr_per_mode() {
        // Lambda_cl = (b^2/2) Var_0[dH^d] and
        // Lambda_qu = (b^2/2) Var_0[dH^c] - b Q, evaluated on the explicit
        // 4-level pair mode, reproduce the infinitesimal integrands
        use crate::operators::{coherence_q, gibbs_state};
        let p = TfimParams::thermodynamic(0.9, 0.01, 1.5);
        let k = 0.9;
        let b = p.beta;
        let m = mode_data(&p, k);
        let h0 = HermitianMatrix::from_diagonal(&[-2.0 * m.eps0, 0.0, 0.0, 2.0 * m.eps0]);
        let rho0 = gibbs_state(&h0, b).unwrap().rho;
        let dhd =
            HermitianMatrix::from_diagonal(&[-2.0 * p.delta_g * m.cos_theta, 0.0, 0.0, 2.0 * p.delta_g * m.cos_theta]);
        let mut dhc = DMatrix::<Complex64>::zeros(4, 4);
        let c = Complex64::new(2.0 * p.delta_g * m.sin_theta, 0.0);
        dhc[(0, 3)] = c;
        dhc[(3, 0)] = c;
        let dhc = HermitianMatrix::new(dhc).unwrap();
        let var = |x: &HermitianMatrix| -> f64 {
            let mean = (x.matrix() * rho0.matrix())
                .diagonal()
                .iter()
                .map(|z| z.re)
                .sum::<f64>();
            let sq = (x.matrix() * x.matrix() * rho0.matrix())
                .diagonal()
                .iter()
                .map(|z| z.re)
                .sum::<f64>();
            sq - mean * mean
        };
        let q = coherence_q(&rho0, &dhc, b, 64).unwrap();
        let lambda_cl_fdr = 0.5 * b * b * var(&dhd);
        let lambda_qu_fdr = 0.5 * b * b * var(&dhc) - b * q;
        // integrands of the infinitesimal momentum integrals
        let dg2 = p.delta_g * p.delta_g;
        let sech = 1.0 / (b * m.eps0).cosh();
        let lcl_inf = b * b * dg2 * sech * sech * m.cos_theta * m.cos_theta;
        let lqu_inf = b * b * dg2 * ((b * m.eps0).tanh() / (b * m.eps0)) * m.sin_theta * m.sin_theta;
        assert_relative_eq!(lambda_cl_fdr, lcl_inf, max_relative = 1e-10);
        assert_relative_eq!(lambda_qu_fdr, lqu_inf, max_relative = 1e-9);
    }

    #[test]
    fn finite_sum_approaches_extensive_integral() {
        let p = TfimParams::thermodynamic(0.75, 0.01, 4.0);
        let err = finite_size_error(&p, 64, |s| s.lambda_qu).unwrap();
        let thermo = lambda_split_tfim(&p).unwrap().lambda_qu * 64.0;
        assert!(err < 1e-6 * thermo.abs().max(1.0), "error {err}");
    }

    #[test]
    fn quadrature_self_convergence() {
        let mut p = TfimParams::thermodynamic(0.75, 0.01, 8.0);
        let a = lambda_split_tfim(&p).unwrap();
        p.quad_nodes = 1024;
        let b = lambda_split_tfim(&p).unwrap();
        assert_abs_diff_eq!(a.lambda_qu, b.lambda_qu, epsilon = 1e-10);
        assert_abs_diff_eq!(a.lambda_cl, b.lambda_cl, epsilon = 1e-10);
    }

    #[test]
    fn low_temperature_lambda_behavior_away_from_criticality() {
        // Lambda_cl -> 0 and Lambda_qu grows as beta increases
        let betas = [2.0, 8.0, 32.0];
        let mut prev_qu = 0.0;
        let mut prev_cl = f64::INFINITY;
        for &b in &betas {
            let p = TfimParams::thermodynamic(0.75, 0.01, b);
            let s = lambda_split_tfim(&p).unwrap();
            assert!(s.lambda_qu > prev_qu);
            assert!(s.lambda_cl < prev_cl);
            prev_qu = s.lambda_qu;
            prev_cl = s.lambda_cl;
        }
    }

    #[test]
    fn rejects_odd_or_tiny_n() {
        assert!(TfimParams::finite(5, 1.0, 0.01, 1.0).is_err());
        assert!(TfimParams::finite(2, 1.0, 0.01, 1.0).is_err());
        assert!(TfimParams::finite(64, 1.0, 0.01, 1.0).is_ok());
    }
}
