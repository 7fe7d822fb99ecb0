//! Concrete protocol builders: the minimal qubit quench with its closed
//! forms, the cyclic qubit x-pulse, and the driven macrospin.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{evolution_unitary, HermitianMatrix, UnitaryMatrix};
use crate::splitting::WorkProtocol;
use crate::stable::{ln_cosh, ln_1p_sinh2, ln_tanh_ratio};

/// Sudden quench of a qubit from omega*sz to
/// omega*(sz cos(theta) + sx sin(theta)).
#[derive(Debug, Clone, Copy)]
pub struct QubitQuenchParams {
    pub omega: f64,
    pub theta: f64,
    pub beta: f64,
}

fn qubit_hamiltonian(omega: f64, theta: f64) -> HermitianMatrix {
    let c = omega * theta.cos();
    let s = omega * theta.sin();
    HermitianMatrix::new(DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(c, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(-c, 0.0),
        ],
    ))
    .expect("qubit Hamiltonian is Hermitian")
}

/// H_0 = omega sz, H_tau = omega (sz cos th + sx sin th), U = 1.
pub fn qubit_quench_protocol(p: &QubitQuenchParams) -> WorkProtocol {
    WorkProtocol::quench(
        qubit_hamiltonian(p.omega, 0.0),
        qubit_hamiltonian(p.omega, p.theta),
        p.beta,
    )
    .expect("qubit dimensions agree")
}

/// Closed-form Sigma, Gamma_qu and Lambda_qu for the qubit quench.
#[derive(Debug, Clone, Copy)]
pub struct QubitClosedForms {
    pub sigma: f64,
    pub gamma_qu: f64,
    pub lambda_qu: f64,
}

/// Evaluates the qubit closed forms in log-stable arithmetic, valid at any
/// beta*omega:
///
///   Sigma     = 2 t atanh(t) sin^2(theta/2),  t = tanh(beta omega)
///   Gamma_qu  = t atanh(t) - t c atanh(t c)
///               - 1/2 ln(1 + sinh^2(beta omega) sin^2 theta),  c = cos theta
///   Lambda_qu = ln[cosh(beta omega) / cosh(beta omega cos theta)]
pub fn qubit_closed_forms(p: &QubitQuenchParams) -> QubitClosedForms {
    let x = p.beta * p.omega;
    let t = x.tanh();
    let c = p.theta.cos();
    // t atanh(t) = x tanh(x); t c atanh(t c) = (t c / 2) ln[(1+tc)/(1-tc)]
    let sigma = 2.0 * x * t * (0.5 * p.theta).sin().powi(2);
    let gamma_qu =
        x * t - 0.5 * t * c * ln_tanh_ratio(x, c) - 0.5 * ln_1p_sinh2(x, p.theta.sin());
    let lambda_qu = ln_cosh(x) - ln_cosh(x * c);
    QubitClosedForms {
        sigma,
        gamma_qu,
        lambda_qu,
    }
}

/// Cyclic qubit protocol H_tau = H_0 = omega sz driven by an x-pulse of
/// intensity h_x and duration tau: U = exp(-i tau (H_0 + h_x sx)).
pub fn qubit_pulse_protocol(omega: f64, hx: f64, tau: f64, beta: f64) -> Result<WorkProtocol> {
    if tau < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "pulse duration tau = {tau} must be nonnegative"
        )));
    }
    let h0 = qubit_hamiltonian(omega, 0.0);
    let generator = HermitianMatrix::new(
        h0.matrix()
            + DMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(0.0, 0.0),
                    Complex64::new(hx, 0.0),
                    Complex64::new(hx, 0.0),
                    Complex64::new(0.0, 0.0),
                ],
            ),
    )
    .expect("pulse generator is Hermitian");
    let u = evolution_unitary(&generator, tau);
    WorkProtocol::new(h0.clone(), h0, u, beta)
}

/// Spin operators (Sx, Sy, Sz) for a spin S = (d-1)/2 via the standard
/// ladder construction; Sz = diag(S, S-1, ..., -S).
pub fn spin_operators(d: usize) -> Result<(HermitianMatrix, HermitianMatrix, HermitianMatrix)> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "spin dimension d = {d} must be at least 2"
        )));
    }
    let s = (d as f64 - 1.0) / 2.0;
    let mut sz = DMatrix::zeros(d, d);
    for i in 0..d {
        sz[(i, i)] = Complex64::new(s - i as f64, 0.0);
    }
    // S+ |s, m> = sqrt(s(s+1) - m(m+1)) |s, m+1>; row i is m = s - i
    let mut sp = DMatrix::<Complex64>::zeros(d, d);
    for i in 1..d {
        let m = s - i as f64;
        let c = (s * (s + 1.0) - m * (m + 1.0)).sqrt();
        sp[(i - 1, i)] = Complex64::new(c, 0.0);
    }
    let sm = sp.adjoint();
    let sx = (&sp + &sm) * Complex64::new(0.5, 0.0);
    let sy = (&sp - &sm) * Complex64::new(0.0, -0.5);
    Ok((
        HermitianMatrix::new(sx).expect("Sx is Hermitian"),
        HermitianMatrix::new(sy).expect("Sy is Hermitian"),
        HermitianMatrix::new(sz).expect("Sz is Hermitian"),
    ))
}

/// Macrospin with d = 2S+1 levels: cyclic H_0 = H_tau = -h_z Sz driven by
/// U = exp(-i (H_0 - h_x Sx) tau).
#[derive(Debug, Clone, Copy)]
pub struct MacrospinParams {
    pub d: usize,
    pub hz: f64,
    pub hx: f64,
    pub tau: f64,
    pub beta: f64,
}

pub fn macrospin_protocol(p: &MacrospinParams) -> Result<WorkProtocol> {
    let (sx, _, sz) = spin_operators(p.d)?;
    let h0 = HermitianMatrix::new(sz.matrix() * Complex64::new(-p.hz, 0.0))
        .expect("scaled Sz is Hermitian");
    let generator = HermitianMatrix::new(h0.matrix() - sx.matrix() * Complex64::new(p.hx, 0.0))
        .expect("pulse generator is Hermitian");
    let u = evolution_unitary(&generator, p.tau);
    WorkProtocol::new(h0.clone(), h0, u, p.beta)
}

/// U = 1 variant used by negative controls and tests.
pub fn macrospin_trivial(d: usize, hz: f64, beta: f64) -> Result<WorkProtocol> {
    let (_, _, sz) = spin_operators(d)?;
    let h0 = HermitianMatrix::new(sz.matrix() * Complex64::new(-hz, 0.0))
        .expect("scaled Sz is Hermitian");
    let dim = h0.dim();
    WorkProtocol::new(h0.clone(), h0, UnitaryMatrix::identity(dim), beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitting::average_split;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn quench_limits() {
        let p0 = qubit_quench_protocol(&QubitQuenchParams {
            omega: 1.0,
            theta: 0.0,
            beta: 1.0,
        });
        assert!((p0.h_tau.matrix() - p0.h0.matrix()).norm() < 1e-14);
        let ppi = qubit_quench_protocol(&QubitQuenchParams {
            omega: 1.0,
            theta: std::f64::consts::PI,
            beta: 1.0,
        });
        assert!((ppi.h_tau.matrix() + p0.h0.matrix()).norm() < 1e-12);
    }

    #[test]
    fn closed_forms_theta_zero() {
        let cf = qubit_closed_forms(&QubitQuenchParams {
            omega: 1.0,
            theta: 0.0,
            beta: 3.0,
        });
        assert_abs_diff_eq!(cf.sigma, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(cf.gamma_qu, 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(cf.lambda_qu, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn pulse_limits() {
        // tau = 0: U = 1 and everything vanishes
        let p = qubit_pulse_protocol(1.0, 1.3, 0.0, 2.0).unwrap();
        let s = average_split(&p).unwrap();
        assert_abs_diff_eq!(s.sigma, 0.0, epsilon = 1e-12);
        // h_x = 0: [U, H0] = 0, both coherent parts vanish
        let p = qubit_pulse_protocol(1.0, 0.0, 0.7, 2.0).unwrap();
        let s = average_split(&p).unwrap();
        assert_abs_diff_eq!(s.gamma_qu, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.lambda_qu, 0.0, epsilon = 1e-12);
        assert!(qubit_pulse_protocol(1.0, 1.0, -0.1, 1.0).is_err());
    }

    #[test]
    fn spin_operator_algebra() {
        for d in [2usize, 3, 7, 40] {
            let (sx, sy, sz) = spin_operators(d).unwrap();
            let s = (d as f64 - 1.0) / 2.0;
            // [Sx, Sy] = i Sz
            let comm = sx.matrix() * sy.matrix() - sy.matrix() * sx.matrix();
            let expected = sz.matrix() * Complex64::new(0.0, 1.0);
            assert!((comm - expected).norm() < 1e-10 * d as f64);
            // Casimir
            let casimir =
                sx.matrix() * sx.matrix() + sy.matrix() * sy.matrix() + sz.matrix() * sz.matrix();
            let target = DMatrix::<Complex64>::identity(d, d) * Complex64::new(s * (s + 1.0), 0.0);
            assert!((casimir - target).norm() < 1e-9 * d as f64);
            // tr Sz = 0
            assert_abs_diff_eq!(sz.trace(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let (sx, _, sz) = spin_operators(2).unwrap();
        assert_relative_eq!(sz.matrix()[(0, 0)].re, 0.5, epsilon = 1e-14);
        assert_relative_eq!(sx.matrix()[(0, 1)].re, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn macrospin_zero_pulse_is_trivial() {
        let p = macrospin_protocol(&MacrospinParams {
            d: 6,
            hz: 1.0,
            hx: 0.0,
            tau: 2.0,
            beta: 1.0,
        })
        .unwrap();
        let s = average_split(&p).unwrap();
        assert_abs_diff_eq!(s.sigma, 0.0, epsilon = 1e-11);
    }
}
