//! Infinitesimal-quench expansions: second-order splittings, the
//! fluctuation-dissipation decomposition, perturbative trajectory
//! probabilities with analyticity diagnostics, perturbative CGFs, and the
//! susceptibility form of the entropy production.
//!
//! The scenario is a sudden quench U = 1 from H_0 to H_0 + dH, expanded to
//! second order in dH. The initial spectrum must be non-degenerate.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{
    gibbs_state, j_superoperator, log_populations, HermitianMatrix, DEFAULT_DEGENERACY_REL_TOL,
};
use crate::quadrature::GaussLegendre;

/// A small perturbation dH on top of H_0 at inverse temperature beta,
/// with U = 1 implied.
#[derive(Debug, Clone)]
pub struct PerturbationInput {
    h0: HermitianMatrix,
    dh: HermitianMatrix,
    beta: f64,
    // cached spectral data of H0
    eps0: Vec<f64>,
    p0: Vec<f64>,
    /// dH in the eigenbasis of H0
    dh_rotated: DMatrix<Complex64>,
    basis: DMatrix<Complex64>,
}

impl PerturbationInput {
    pub fn new(h0: HermitianMatrix, dh: HermitianMatrix, beta: f64) -> Result<Self> {
        if h0.dim() != dh.dim() {
            return Err(Error::DimensionMismatch {
                left: h0.dim(),
                right: dh.dim(),
            });
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidBeta { beta });
        }
        let spec = h0.spectral();
        let eps0 = spec.eigenvalues().to_vec();
        let range = eps0.last().unwrap() - eps0[0];
        let tol = DEFAULT_DEGENERACY_REL_TOL * range.max(1.0);
        let mut min_gap = f64::INFINITY;
        for w in eps0.windows(2) {
            min_gap = min_gap.min(w[1] - w[0]);
        }
        if eps0.len() > 1 && min_gap <= tol {
            return Err(Error::DegenerateSpectrum { gap: min_gap, tol });
        }
        let (log_p0, _) = log_populations(&eps0, beta);
        let p0 = log_p0.iter().map(|&l| l.exp()).collect();
        let dh_rotated = spec.vectors().adjoint() * dh.matrix() * spec.vectors();
        Ok(PerturbationInput {
            basis: spec.vectors().clone(),
            h0,
            dh,
            beta,
            eps0,
            p0,
            dh_rotated,
        })
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn h0(&self) -> &HermitianMatrix {
        &self.h0
    }

    pub fn dh(&self) -> &HermitianMatrix {
        &self.dh
    }

    /// The quenched protocol H_0 -> H_0 + dH at U = 1, for exact-engine
    /// comparisons.
    pub fn protocol(&self) -> Result<crate::splitting::WorkProtocol> {
        let h_tau = HermitianMatrix::new(self.h0.matrix() + self.dh.matrix())?;
        crate::splitting::WorkProtocol::quench(self.h0.clone(), h_tau, self.beta)
    }

    fn dh_diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.dh_rotated[(j, j)].re).collect()
    }

    /// <dH^d>_0 and <(dH^d)^2>_0.
    fn diag_moments(&self) -> (f64, f64) {
        let d = self.dh_diag();
        let m1 = d.iter().zip(&self.p0).map(|(&x, &p)| p * x).sum();
        let m2 = d.iter().zip(&self.p0).map(|(&x, &p)| p * x * x).sum();
        (m1, m2)
    }

    /// Var_0 of the coherent part: sum_{i != j} p_i |dH_ij|^2.
    fn coherent_variance(&self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += self.p0[i] * self.dh_rotated[(i, j)].norm_sqr();
                }
            }
        }
        acc
    }

    /// I^y(rho_0, dH^c) in the cached eigenbasis.
    fn skew_coherent(&self, y: f64) -> f64 {
        let n = self.dim();
        let py: Vec<f64> = self.p0.iter().map(|&p| p.powf(y)).collect();
        let p1y: Vec<f64> = self.p0.iter().map(|&p| p.powf(1.0 - y)).collect();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += 0.5
                        * self.dh_rotated[(i, j)].norm_sqr()
                        * (py[i] - py[j])
                        * (p1y[i] - p1y[j]);
                }
            }
        }
        acc
    }
}

/// Splits dH into its dephased and coherent parts in the H_0 eigenbasis:
/// dH = dH^d + dH^c with dH^d = D_{H_0}(dH).
pub fn split_perturbation(inp: &PerturbationInput) -> (HermitianMatrix, HermitianMatrix) {
    let n = inp.dim();
    let mut diag = DMatrix::<Complex64>::zeros(n, n);
    let mut coh = inp.dh_rotated.clone();
    for i in 0..n {
        diag[(i, i)] = Complex64::new(inp.dh_rotated[(i, i)].re, 0.0);
        coh[(i, i)] = Complex64::new(0.0, 0.0);
    }
    let back_d = &inp.basis * diag * inp.basis.adjoint();
    let back_c = &inp.basis * coh * inp.basis.adjoint();
    (
        HermitianMatrix::new(back_d).expect("dephased part is Hermitian"),
        HermitianMatrix::new(back_c).expect("coherent part is Hermitian"),
    )
}

/// Second-order splittings in terms of the J superoperator:
///
///   Sigma     = (beta^2/2) tr dH J[dH - <dH>]
///   Lambda_cl = (beta^2/2) tr dH^d J[dH^d - <dH^d>]
///   Lambda_qu = (beta^2/2) tr dH^c J[dH^c]
#[derive(Debug, Clone, Copy)]
pub struct PerturbativeSplit {
    pub sigma: f64,
    pub lambda_cl: f64,
    pub lambda_qu: f64,
}

pub fn perturbative_split(inp: &PerturbationInput) -> Result<PerturbativeSplit> {
    let rho0 = gibbs_state(&inp.h0, inp.beta)?.rho;
    let (dhd, dhc) = split_perturbation(inp);
    let (m1, _) = inp.diag_moments();
    let n = inp.dim();
    let shift = DMatrix::<Complex64>::identity(n, n) * Complex64::new(m1, 0.0);

    let centered = HermitianMatrix::new(inp.dh.matrix() - &shift)?;
    let j_full = j_superoperator(&rho0, &centered)?;
    let prod = inp.dh.matrix() * j_full.matrix();
    let sigma: f64 = (0..n).map(|i| prod[(i, i)].re).sum();

    let centered_d = HermitianMatrix::new(dhd.matrix() - &shift)?;
    let j_d = j_superoperator(&rho0, &centered_d)?;
    let prod = dhd.matrix() * j_d.matrix();
    let lambda_cl: f64 = (0..n).map(|i| prod[(i, i)].re).sum();

    let j_c = j_superoperator(&rho0, &dhc)?;
    let prod = dhc.matrix() * j_c.matrix();
    let lambda_qu: f64 = (0..n).map(|i| prod[(i, i)].re).sum();

    let half_b2 = 0.5 * inp.beta * inp.beta;
    Ok(PerturbativeSplit {
        sigma: half_b2 * sigma,
        lambda_cl: half_b2 * lambda_cl,
        lambda_qu: half_b2 * lambda_qu,
    })
}

/// The fluctuation-dissipation decomposition of the second-order splittings:
///
///   variance_term = (beta^2/2) Var_0[dH]
///   q_term        = beta Q, the coherence correction
///   Lambda_cl     = (beta^2/2) Var_0[dH^d]
///   Lambda_qu     = (beta^2/2) Var_0[dH^c] - beta Q
#[derive(Debug, Clone, Copy)]
pub struct FdrDecomposition {
    pub variance_term: f64,
    pub q_term: f64,
    pub lambda_cl: f64,
    pub lambda_qu: f64,
}

pub fn fdr_decomposition(inp: &PerturbationInput, quad_nodes: usize) -> Result<FdrDecomposition> {
    let (m1, m2) = inp.diag_moments();
    let var_d = m2 - m1 * m1;
    let var_c = inp.coherent_variance();
    let quad = GaussLegendre::new(quad_nodes.max(8));
    let q_integral = quad.integrate(0.0, 1.0, |y| inp.skew_coherent(y));
    let q_term = 0.5 * inp.beta * inp.beta * q_integral;
    let half_b2 = 0.5 * inp.beta * inp.beta;
    Ok(FdrDecomposition {
        variance_term: half_b2 * (var_d + var_c),
        q_term,
        lambda_cl: half_b2 * var_d,
        lambda_qu: half_b2 * var_c - q_term,
    })
}

/// Per-level expansion coefficients of the trajectory probabilities:
/// p~_j = p_j (1 - f~_j), p_j^tau = p_j (1 - f_j), q_j = p_j (1 - s_j).
#[derive(Debug, Clone)]
pub struct ExpansionCoefficients {
    /// dH_jj in the H_0 eigenbasis
    pub dh_diag: Vec<f64>,
    /// second-order energy shifts E_j^(2)
    pub e2: Vec<f64>,
    pub f_tilde: Vec<f64>,
    pub f: Vec<f64>,
    pub s: Vec<f64>,
}

/// Builds the expansion coefficients. Errors when an energy denominator is
/// below 1e-10 of the spectral range.
pub fn expansion_coefficients(inp: &PerturbationInput) -> Result<ExpansionCoefficients> {
    let n = inp.dim();
    let beta = inp.beta;
    let eps = &inp.eps0;
    let range = (eps[n - 1] - eps[0]).max(1.0);
    let denom_tol = 1e-10 * range;
    let dh_diag = inp.dh_diag();
    let (m1, m2) = inp.diag_moments();

    let mut e2 = vec![0.0; n];
    let mut s = vec![0.0; n];
    for j in 0..n {
        for l in 0..n {
            if l == j {
                continue;
            }
            let gap = eps[j] - eps[l];
            if gap.abs() < denom_tol {
                return Err(Error::DegenerateSpectrum {
                    gap: gap.abs(),
                    tol: denom_tol,
                });
            }
            let w2 = inp.dh_rotated[(j, l)].norm_sqr();
            e2[j] += w2 / gap;
            // 1 - e^{-beta (eps_l - eps_j)} can be exponentially large at low
            // temperature; that is exactly the analyticity hazard s_j tracks
            s[j] += (1.0 - (-beta * (eps[l] - eps[j])).exp()) / (gap * gap) * w2;
        }
    }
    let mean_e2: f64 = e2.iter().zip(&inp.p0).map(|(&x, &p)| p * x).sum();

    let mut f_tilde = vec![0.0; n];
    let mut f = vec![0.0; n];
    for j in 0..n {
        let centered = dh_diag[j] - m1;
        f_tilde[j] = beta * centered + beta * beta * m1 * centered
            - 0.5 * beta * beta * (dh_diag[j] * dh_diag[j] - m2);
        f[j] = f_tilde[j] + beta * (e2[j] - mean_e2);
    }
    Ok(ExpansionCoefficients {
        dh_diag,
        e2,
        f_tilde,
        f,
        s,
    })
}

/// Analyticity diagnostics: the series forms of the perturbative trajectory
/// probabilities are trusted only while every |s_j|, |f_j|, |f~_j| < 1.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticityReport {
    pub max_s: f64,
    pub max_f: f64,
    pub max_f_tilde: f64,
    pub s_ok: bool,
    pub f_ok: bool,
    pub f_tilde_ok: bool,
}

impl AnalyticityReport {
    pub fn all_ok(&self) -> bool {
        self.s_ok && self.f_ok && self.f_tilde_ok
    }
}

pub fn analyticity_report(inp: &PerturbationInput) -> Result<AnalyticityReport> {
    let coeff = expansion_coefficients(inp)?;
    let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    let max_s = max_abs(&coeff.s);
    let max_f = max_abs(&coeff.f);
    let max_f_tilde = max_abs(&coeff.f_tilde);
    Ok(AnalyticityReport {
        max_s,
        max_f,
        max_f_tilde,
        s_ok: max_s < 1.0,
        f_ok: max_f < 1.0,
        f_tilde_ok: max_f_tilde < 1.0,
    })
}

/// Perturbative reduced CGFs of the dephased-Hamiltonian split:
///
///   K_lambda_cl(v) = (beta^2/2)(v^2 - v) Var_0[dH^d]
///   K_lambda_qu(u) = (beta^2/2)(u^2 - u) Var_0[dH^c]
///                  + (beta^2/2) int_0^u dx int_x^{1-x} dy I^y(rho_0, dH^c)
///
/// The double integral uses nested Gauss–Legendre with `nodes` points per
/// axis; the result must be stable under node doubling to 1e-9.
pub fn perturbative_cgf(
    inp: &PerturbationInput,
    v: f64,
    u: f64,
    nodes: usize,
) -> Result<(f64, f64)> {
    let (m1, m2) = inp.diag_moments();
    let var_d = m2 - m1 * m1;
    let var_c = inp.coherent_variance();
    let half_b2 = 0.5 * inp.beta * inp.beta;
    let k_cl = half_b2 * (v * v - v) * var_d;

    let n = nodes.max(8);
    let double = |order: usize| -> f64 {
        let quad = GaussLegendre::new(order);
        quad.integrate(0.0, u, |x| {
            quad.integrate(x, 1.0 - x, |y| inp.skew_coherent(y))
        })
    };
    let d1 = double(n);
    let d2 = double(2 * n);
    if (d1 - d2).abs() > 1e-9 {
        return Err(Error::QuadratureNotConverged {
            what: "perturbative CGF double integral",
            delta: (d1 - d2).abs(),
        });
    }
    let k_qu = half_b2 * (u * u - u) * var_c + half_b2 * d2;
    Ok((k_cl, k_qu))
}

/// Susceptibility form of the entropy production for a quench
/// g_0 -> g_0 + delta_g: Sigma ~ -(beta/2) delta_g^2 F''(g_0),
/// with F'' from a central second difference on a uniform grid.
pub fn susceptibility_sigma(
    g: &[f64],
    free_energy: &[f64],
    g0: f64,
    delta_g: f64,
    beta: f64,
) -> Result<f64> {
    if g.len() != free_energy.len() {
        return Err(Error::DimensionMismatch {
            left: g.len(),
            right: free_energy.len(),
        });
    }
    if g.len() < 5 {
        return Err(Error::GridTooCoarse { points: g.len() });
    }
    let h = g[1] - g[0];
    if h <= 0.0 {
        return Err(Error::InvalidParameter("grid must be increasing".into()));
    }
    for w in g.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
            return Err(Error::InvalidParameter("grid must be uniform".into()));
        }
    }
    let idx = g
        .iter()
        .position(|&x| (x - g0).abs() <= 1e-9 * h.max(g0.abs()))
        .ok_or_else(|| Error::InvalidParameter(format!("g0 = {g0} is not on the grid")))?;
    if idx == 0 || idx + 1 >= g.len() {
        return Err(Error::InvalidParameter(
            "g0 must be an interior grid point".into(),
        ));
    }
    let second = (free_energy[idx + 1] - 2.0 * free_energy[idx] + free_energy[idx - 1]) / (h * h);
    Ok(-0.5 * beta * delta_g * delta_g * second)
}

/// Exact quench entropy production beta tr{dH rho_0} - beta dF, valid for
/// any quench magnitude (U = 1).
pub fn quench_sigma_exact(h0: &HermitianMatrix, h_tau: &HermitianMatrix, beta: f64) -> Result<f64> {
    if h0.dim() != h_tau.dim() {
        return Err(Error::DimensionMismatch {
            left: h0.dim(),
            right: h_tau.dim(),
        });
    }
    if beta < 0.0 || !beta.is_finite() {
        return Err(Error::InvalidBeta { beta });
    }
    let g0 = gibbs_state(h0, beta)?;
    let g_tau = gibbs_state(h_tau, beta)?;
    let dh = h_tau.matrix() - h0.matrix();
    let prod = &dh * g0.rho.matrix();
    let work: f64 = (0..h0.dim()).map(|i| prod[(i, i)].re).sum();
    // beta dF = -(ln Z_tau - ln Z_0)
    Ok(beta * work + g_tau.ln_z - g0.ln_z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_hermitian;
    use crate::splitting::lambda_split;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_input(seed: u64, dim: usize, beta: f64, scale: f64) -> PerturbationInput {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h0 = random_hermitian(&mut rng, dim, 1.0);
        let dh = random_hermitian(&mut rng, dim, scale);
        PerturbationInput::new(h0, dh, beta).unwrap()
    }

    fn qubit_input(omega: f64, theta: f64, beta: f64) -> PerturbationInput {
        let h0 = HermitianMatrix::from_diagonal(&[omega, -omega]);
        // dH = omega[(cos th - 1) sz + sin th sx] written in the eigenbasis
        // ordering of from_diagonal (descending energies on the diagonal)
        let c = omega * (theta.cos() - 1.0);
        let s = omega * theta.sin();
        let dh = HermitianMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(c, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(-c, 0.0),
            ],
        ))
        .unwrap();
        PerturbationInput::new(h0, dh, beta).unwrap()
    }

    #[test]
    fn rejects_degenerate_h0() {
        let h0 = HermitianMatrix::from_diagonal(&[1.0, 1.0, 2.0]);
        let dh = HermitianMatrix::from_diagonal(&[0.1, 0.0, -0.1]);
        assert!(matches!(
            PerturbationInput::new(h0, dh, 1.0),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn split_is_exact_and_commuting_has_no_coherent_part() {
        let inp = random_input(2, 5, 1.0, 0.3);
        let (dhd, dhc) = split_perturbation(&inp);
        assert!(((dhd.matrix() + dhc.matrix()) - inp.dh.matrix()).norm() < 1e-12);
        // commuting perturbation: coherent part vanishes
        let h0 = HermitianMatrix::from_diagonal(&[0.0, 1.0, 3.0]);
        let dh = HermitianMatrix::from_diagonal(&[0.2, -0.1, 0.4]);
        let inp = PerturbationInput::new(h0, dh, 0.7).unwrap();
        let (_, dhc) = split_perturbation(&inp);
        assert!(dhc.matrix().norm() < 1e-13);
    }

    #[test]
    fn coherent_part_has_zero_thermal_mean() {
        let inp = random_input(5, 4, 2.0, 0.5);
        let (_, dhc) = split_perturbation(&inp);
        let rho0 = gibbs_state(&inp.h0, inp.beta).unwrap().rho;
        let prod = dhc.matrix() * rho0.matrix();
        let mean: f64 = (0..4).map(|i| prod[(i, i)].re).sum();
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn qubit_quench_split_directions() {
        let theta = 0.3;
        let inp = qubit_input(1.0, theta, 1.0);
        let (dhd, dhc) = split_perturbation(&inp);
        // dephased part is the sz-like diagonal, coherent part the sx part
        assert_abs_diff_eq!(
            dhd.matrix()[(0, 0)].re,
            (theta.cos() - 1.0),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(dhc.matrix()[(0, 1)].re, theta.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(dhc.matrix()[(0, 0)].re, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn proportional_to_identity_gives_zero() {
        let h0 = HermitianMatrix::from_diagonal(&[0.0, 1.0, 2.0]);
        let dh = HermitianMatrix::from_diagonal(&[0.3, 0.3, 0.3]);
        let inp = PerturbationInput::new(h0, dh, 1.5).unwrap();
        let ps = perturbative_split(&inp).unwrap();
        assert_abs_diff_eq!(ps.sigma, 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(ps.lambda_cl, 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(ps.lambda_qu, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn additivity_of_second_order_terms() {
        let inp = random_input(9, 6, 1.3, 0.2);
        let ps = perturbative_split(&inp).unwrap();
        assert_abs_diff_eq!(ps.lambda_cl + ps.lambda_qu, ps.sigma, epsilon = 1e-10);
    }

    #[test]
    fn exact_engine_error_shrinks_cubically() {
        // |exact - perturbative| should fall by ~8 when dg halves
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let h0 = random_hermitian(&mut rng, 5, 1.0);
        let dh_unit = random_hermitian(&mut rng, 5, 1.0);
        let beta = 1.2;
        let err_at = |dg: f64| -> f64 {
            let dh = HermitianMatrix::new(dh_unit.matrix() * Complex64::new(dg, 0.0)).unwrap();
            let inp = PerturbationInput::new(h0.clone(), dh, beta).unwrap();
            let ps = perturbative_split(&inp).unwrap();
            let (lcl, lqu) = lambda_split(&inp.protocol().unwrap()).unwrap();
            (lcl - ps.lambda_cl).abs().max((lqu - ps.lambda_qu).abs())
        };
        let e1 = err_at(0.08);
        let e2 = err_at(0.04);
        let ratio = e1 / e2;
        assert!(
            (5.0..12.0).contains(&ratio),
            "halving ratio {ratio} not cubic"
        );
    }

    #[test]
    fn fdr_matches_j_superoperator_forms() {
        for seed in [1, 4, 7] {
            let inp = random_input(seed, 5, 1.7, 0.4);
            let ps = perturbative_split(&inp).unwrap();
            let fdr = fdr_decomposition(&inp, 64).unwrap();
            assert_abs_diff_eq!(fdr.lambda_cl, ps.lambda_cl, epsilon = 1e-9);
            assert_abs_diff_eq!(fdr.lambda_qu, ps.lambda_qu, epsilon = 1e-9);
            assert_abs_diff_eq!(
                fdr.variance_term - fdr.q_term,
                ps.sigma,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn incoherent_fdr_is_pure_variance() {
        let h0 = HermitianMatrix::from_diagonal(&[0.0, 0.8, 2.1]);
        let dh = HermitianMatrix::from_diagonal(&[0.1, -0.2, 0.3]);
        let inp = PerturbationInput::new(h0, dh, 1.1).unwrap();
        let fdr = fdr_decomposition(&inp, 32).unwrap();
        assert_abs_diff_eq!(fdr.q_term, 0.0, epsilon = 1e-13);
        let ps = perturbative_split(&inp).unwrap();
        assert_abs_diff_eq!(fdr.variance_term, ps.sigma, epsilon = 1e-10);
    }

    #[test]
    fn high_temperature_limit_is_maximally_mixed_variance() {
        let inp = random_input(13, 4, 1e-3, 0.5);
        let fdr = fdr_decomposition(&inp, 32).unwrap();
        let beta = inp.beta();
        let n = inp.dim();
        // Var_{I/d} of the dephased and coherent parts
        let (dhd, dhc) = split_perturbation(&inp);
        let mixed_var = |m: &HermitianMatrix| -> f64 {
            let sq = m.matrix() * m.matrix();
            let tr2: f64 = (0..n).map(|i| sq[(i, i)].re).sum::<f64>() / n as f64;
            let tr1 = m.trace() / n as f64;
            tr2 - tr1 * tr1
        };
        let expect_cl = 0.5 * beta * beta * mixed_var(&dhd);
        let expect_qu = 0.5 * beta * beta * mixed_var(&dhc);
        assert_relative_eq!(fdr.lambda_cl, expect_cl, max_relative = 1e-2);
        assert_relative_eq!(fdr.lambda_qu, expect_qu, max_relative = 1e-2);
    }

    #[test]
    fn qubit_s1_closed_form() {
        // s for the excited level: (1 - e^{2 beta omega}) sin^2(theta)/4
        let omega = 1.0;
        let theta = 0.1;
        let beta = 1.4;
        let inp = qubit_input(omega, theta, beta);
        let coeff = expansion_coefficients(&inp).unwrap();
        // index of the excited state (+omega) in ascending order is 1
        let expected = (1.0 - (2.0 * beta * omega).exp()) * (theta.sin() / 2.0).powi(2);
        assert_relative_eq!(coeff.s[1], expected, epsilon = 1e-12);
    }

    #[test]
    fn qubit_f_tilde_and_f_closed_forms() {
        // magnitudes of the exact-oracle-consistent forms:
        // f~_1 = -2 bw sin^2(th/2)(1+tanh bw)[1 + 2 bw sin^2(th/2) tanh bw]
        // f_1  = f~_1 + (bw/2) sin^2(th) (1 + tanh bw)
        let omega = 1.0;
        let theta = 0.1;
        let beta = 2.0;
        let bw = beta * omega;
        let inp = qubit_input(omega, theta, beta);
        let coeff = expansion_coefficients(&inp).unwrap();
        let s2 = (0.5 * theta).sin().powi(2);
        let ft_expected = -2.0 * bw * s2 * (1.0 + bw.tanh()) * (1.0 + 2.0 * bw * s2 * bw.tanh());
        assert_relative_eq!(coeff.f_tilde[1], ft_expected, epsilon = 1e-12);
        let f_expected = ft_expected + 0.5 * bw * theta.sin().powi(2) * (1.0 + bw.tanh());
        assert_relative_eq!(coeff.f[1], f_expected, epsilon = 1e-12);
    }

    #[test]
    fn expansion_predicts_exact_populations_to_third_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let h0 = random_hermitian(&mut rng, 4, 1.0);
        let dh_unit = random_hermitian(&mut rng, 4, 1.0);
        let beta = 0.9;
        let residual = |dg: f64| -> f64 {
            let dh = HermitianMatrix::new(dh_unit.matrix() * Complex64::new(dg, 0.0)).unwrap();
            let inp = PerturbationInput::new(h0.clone(), dh, beta).unwrap();
            let coeff = expansion_coefficients(&inp).unwrap();
            // exact ptilde from the Gibbs state of the dephased Hamiltonian
            let (dhd, _) = split_perturbation(&inp);
            let hdeph = HermitianMatrix::new(inp.h0.matrix() + dhd.matrix()).unwrap();
            let spec = hdeph.spectral();
            let (log_pt, _) = log_populations(spec.eigenvalues(), beta);
            let mut worst = 0.0_f64;
            for j in 0..4 {
                let predicted = inp.p0[j] * (1.0 - coeff.f_tilde[j]);
                worst = worst.max((log_pt[j].exp() - predicted).abs());
            }
            worst
        };
        let r1 = residual(0.04);
        let r2 = residual(0.02);
        let ratio = r1 / r2;
        assert!(
            (5.0..12.0).contains(&ratio),
            "population residual ratio {ratio} not cubic"
        );
    }

    #[test]
    fn normalization_of_coefficients() {
        let inp = random_input(21, 5, 1.1, 0.05);
        let coeff = expansion_coefficients(&inp).unwrap();
        // sum_j p_j f_j = O(dH^3) for each family
        for v in [&coeff.f_tilde, &coeff.f, &coeff.s] {
            let norm: f64 = v.iter().zip(&inp.p0).map(|(&x, &p)| p * x).sum();
            assert_abs_diff_eq!(norm, 0.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn analyticity_beta_zero_vanishes() {
        let inp = random_input(3, 4, 0.0, 0.1);
        let rep = analyticity_report(&inp).unwrap();
        assert!(rep.max_s < 1e-10);
        assert!(rep.max_f_tilde < 1e-10);
        assert!(rep.all_ok());
    }

    #[test]
    fn s_grows_exponentially_f_tilde_linearly() {
        // log-slope of max|s| in beta approaches the spectral gap scale,
        // while max|f~| grows essentially linearly
        let omega = 1.0;
        let theta = 0.05;
        let betas: Vec<f64> = (1..=6).map(|k| 1.0 + 0.5 * k as f64).collect();
        let mut log_s = Vec::new();
        let mut f_vals = Vec::new();
        for &b in &betas {
            let rep = analyticity_report(&qubit_input(omega, theta, b)).unwrap();
            log_s.push(rep.max_s.ln());
            f_vals.push(rep.max_f_tilde);
        }
        // d ln|s| / d beta ~ 2 omega (the qubit gap in s_1 is e^{2 beta omega})
        let slope = (log_s.last().unwrap() - log_s[0]) / (betas.last().unwrap() - betas[0]);
        assert!((slope - 2.0).abs() < 0.25, "log-slope {slope}");
        // f~ growth is polynomial: ratio of endpoints stays near linear scaling
        let growth = f_vals.last().unwrap() / f_vals[0];
        let linear = betas.last().unwrap() / betas[0];
        assert!(growth < 3.0 * linear);
    }

    #[test]
    fn perturbative_cgf_endpoints() {
        let inp = random_input(41, 4, 1.0, 0.1);
        let (k_cl_0, k_qu_0) = perturbative_cgf(&inp, 0.0, 0.0, 24).unwrap();
        assert_abs_diff_eq!(k_cl_0, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k_qu_0, 0.0, epsilon = 1e-12);
        let (k_cl_1, k_qu_1) = perturbative_cgf(&inp, 1.0, 1.0, 24).unwrap();
        assert_abs_diff_eq!(k_cl_1, 0.0, epsilon = 1e-12);
        // the double integral cancels the variance term at u = 1
        assert_abs_diff_eq!(k_qu_1, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn perturbative_cgf_sum_matches_exact_sigma_cgf() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let h0 = random_hermitian(&mut rng, 4, 1.0);
        let dh_unit = random_hermitian(&mut rng, 4, 1.0);
        let beta = 1.1;
        let v = 0.6;
        let gap_at = |dg: f64| -> f64 {
            let dh = HermitianMatrix::new(dh_unit.matrix() * Complex64::new(dg, 0.0)).unwrap();
            let inp = PerturbationInput::new(h0.clone(), dh, beta).unwrap();
            let (k_cl, k_qu) = perturbative_cgf(&inp, v, v, 24).unwrap();
            let exact = crate::trajectories::cgf_trace(
                &inp.protocol().unwrap(),
                crate::trajectories::CgfKind::Sigma,
                v,
                0.0,
            )
            .unwrap();
            (exact - k_cl - k_qu).abs()
        };
        // the gap is O(dg^3); generic draws can carry a dominant quartic
        // term, so assert at-least-cubic shrinkage across two halvings
        let g1 = gap_at(0.08);
        let g2 = gap_at(0.04);
        let g3 = gap_at(0.02);
        assert!(g1 / g2 > 5.5, "first halving ratio {}", g1 / g2);
        assert!(g2 / g3 > 5.5, "second halving ratio {}", g2 / g3);
    }

    #[test]
    fn susceptibility_matches_exact_quench_form() {
        // H(g) = g sz on a qubit: F(g) = -ln(2 cosh(beta g))/beta
        let beta = 1.3;
        let g0 = 0.8;
        let dg = 0.02;
        let h = 0.01;
        let g: Vec<f64> = (-3..=3).map(|k| g0 + h * k as f64).collect();
        let f: Vec<f64> = g
            .iter()
            .map(|&x| -(2.0 * (beta * x).cosh()).ln() / beta)
            .collect();
        let susc = susceptibility_sigma(&g, &f, g0, dg, beta).unwrap();
        let h0 = HermitianMatrix::from_diagonal(&[g0, -g0]);
        let h_tau = HermitianMatrix::from_diagonal(&[g0 + dg, -(g0 + dg)]);
        let exact = quench_sigma_exact(&h0, &h_tau, beta).unwrap();
        assert_relative_eq!(susc, exact, max_relative = 2e-2);
        // dg = 0 gives zero
        assert_abs_diff_eq!(
            susceptibility_sigma(&g, &f, g0, 0.0, beta).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        // too-coarse grid rejected
        assert!(matches!(
            susceptibility_sigma(&g[..4], &f[..4], g0, dg, beta),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn quench_sigma_exact_matches_engine() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let h0 = random_hermitian(&mut rng, 5, 1.0);
        let dh = random_hermitian(&mut rng, 5, 0.3);
        let h_tau = HermitianMatrix::new(h0.matrix() + dh.matrix()).unwrap();
        let beta = 2.0;
        let exact = quench_sigma_exact(&h0, &h_tau, beta).unwrap();
        let p = crate::splitting::WorkProtocol::quench(h0, h_tau, beta).unwrap();
        let s = crate::splitting::sigma(&p).unwrap();
        assert_relative_eq!(exact, s, epsilon = 1e-10);
    }
}
