//! Two-point-measurement trajectory statistics: joint tables, stochastic
//! splittings, distributions, cumulants, CGFs and fluctuation theorems.
//!
//! The forward probability of the trajectory |i_0> -> |j_tau> is
//! P_F[i,j] = |<j_tau|U|i_0>|^2 p_i^0, and the five stochastic quantities
//! are log-ratios of the four population vectors:
//!
//!   sigma     = ln p_i^0 / p_j^tau
//!   gamma_cl  = ln q_j^tau / p_j^tau      gamma_qu = ln p_i^0 / q_j^tau
//!   lambda_cl = ln p_i^0 / ptilde_i^tau   lambda_qu = ln ptilde_i^tau / p_j^tau
//!
//! Values are formed from exact log-populations, so they stay finite at any
//! finite beta; the only +-inf entries come from marginals q_j that underflow
//! entirely, and those carry vanishing probability weight.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectra::ProtocolSpectra;
use crate::splitting::{average_split_from_spectra, AverageSplit, WorkProtocol};
use crate::stable::log_sum_exp;

/// Stochastic quantity selector; the names double as CSV column headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Sigma,
    GammaCl,
    GammaQu,
    LambdaCl,
    LambdaQu,
}

impl Quantity {
    pub const ALL: [Quantity; 5] = [
        Quantity::Sigma,
        Quantity::GammaCl,
        Quantity::GammaQu,
        Quantity::LambdaCl,
        Quantity::LambdaQu,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::Sigma => "sigma",
            Quantity::GammaCl => "gamma_cl",
            Quantity::GammaQu => "gamma_qu",
            Quantity::LambdaCl => "lambda_cl",
            Quantity::LambdaQu => "lambda_qu",
        }
    }

    pub fn parse(s: &str) -> Option<Quantity> {
        Quantity::ALL.iter().copied().find(|q| q.as_str() == s)
    }
}

impl std::fmt::Display for Quantity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Joint forward probabilities and per-trajectory stochastic values for one
/// protocol.
#[derive(Debug, Clone)]
pub struct TrajectoryTable {
    dim: usize,
    beta: f64,
    p0: Vec<f64>,
    ptau: Vec<f64>,
    q: Vec<f64>,
    ptilde: Vec<f64>,
    log_p0: Vec<f64>,
    log_ptau: Vec<f64>,
    log_q: Vec<f64>,
    log_ptilde: Vec<f64>,
    overlap: DMatrix<f64>,
    joint: DMatrix<f64>,
    averages: AverageSplit,
}

/// Builds the trajectory table. Requires beta > 0 (the backward reference
/// needs a normalizable thermal state).
pub fn build_table(p: &WorkProtocol) -> Result<TrajectoryTable> {
    if p.beta <= 0.0 {
        return Err(Error::BetaZero {
            what: "trajectory table",
        });
    }
    let sp = ProtocolSpectra::build(p)?;
    Ok(table_from_spectra(&sp))
}

pub(crate) fn table_from_spectra(sp: &ProtocolSpectra) -> TrajectoryTable {
    TrajectoryTable {
        dim: sp.dim,
        beta: sp.beta,
        p0: sp.p0(),
        ptau: sp.ptau(),
        q: sp.q(),
        ptilde: sp.ptilde(),
        log_p0: sp.log_p0.clone(),
        log_ptau: sp.log_ptau.clone(),
        log_q: sp.log_q.clone(),
        log_ptilde: sp.log_ptilde.clone(),
        overlap: sp.overlap.clone(),
        joint: sp.joint(),
        averages: average_split_from_spectra(sp),
    }
}

impl TrajectoryTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Initial thermal populations p_i^0.
    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    /// Final thermal populations p_j^tau.
    pub fn ptau(&self) -> &[f64] {
        &self.ptau
    }

    /// Marginals q_j^tau = sum_i P_F[i,j].
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Populations of the dephased-Hamiltonian Gibbs state.
    pub fn ptilde(&self) -> &[f64] {
        &self.ptilde
    }

    /// |<j_tau|U|i_0>|^2, indexed (i, j).
    pub fn overlap(&self) -> &DMatrix<f64> {
        &self.overlap
    }

    /// Joint forward probabilities P_F, indexed (i, j).
    pub fn joint(&self) -> &DMatrix<f64> {
        &self.joint
    }

    /// The per-trajectory value of a stochastic quantity.
    pub fn value(&self, q: Quantity, i: usize, j: usize) -> f64 {
        match q {
            Quantity::Sigma => self.log_p0[i] - self.log_ptau[j],
            Quantity::GammaCl => self.log_q[j] - self.log_ptau[j],
            Quantity::GammaQu => self.log_p0[i] - self.log_q[j],
            Quantity::LambdaCl => self.log_p0[i] - self.log_ptilde[i],
            Quantity::LambdaQu => self.log_ptilde[i] - self.log_ptau[j],
        }
    }

    /// Materialized value matrix, indexed (i, j).
    pub fn values(&self, q: Quantity) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.value(q, i, j))
    }

    /// First moment sum_ij P_F[i,j] value[i,j]; entries with zero weight are
    /// skipped so that +-inf values at vanishing probability do not poison
    /// the sum.
    pub fn mean(&self, q: Quantity) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let w = self.joint[(i, j)];
                if w > 0.0 {
                    acc += w * self.value(q, i, j);
                }
            }
        }
        acc
    }

    /// <e^{-x}> for a stochastic quantity, via log-sum-exp over trajectories.
    pub fn exponential_average(&self, q: Quantity) -> f64 {
        let mut terms = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let w = self.joint[(i, j)];
                if w > 0.0 {
                    terms.push(w.ln() - self.value(q, i, j));
                }
            }
        }
        log_sum_exp(&terms).exp()
    }

    /// Total probability weight carried by non-finite values of `q`.
    pub fn infinite_weight(&self, q: Quantity) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let w = self.joint[(i, j)];
                if w > 0.0 && !self.value(q, i, j).is_finite() {
                    acc += w;
                }
            }
        }
        acc
    }

    /// Averages of the five quantities computed by the splitting engine on
    /// the same spectral data.
    pub fn averages(&self) -> AverageSplit {
        self.averages
    }
}

/// Value-probability atoms of one stochastic quantity; values ascending,
/// any non-finite atoms at the end.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteDistribution {
    pub atoms: Vec<(f64, f64)>,
}

/// Absolute tolerance for merging coincident atoms; degenerate spectra
/// produce exactly coincident values up to roundoff.
pub const VALUE_MERGE_TOL: f64 = 1e-10;

/// Collects P(x) = sum_ij P_F[i,j] delta(x - x[i,j]), merging atoms within
/// [`VALUE_MERGE_TOL`].
pub fn distribution(table: &TrajectoryTable, q: Quantity) -> DiscreteDistribution {
    let n = table.dim();
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n * n);
    let mut pos_inf = 0.0;
    let mut neg_inf = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = table.joint()[(i, j)];
            if w <= 0.0 {
                continue;
            }
            let v = table.value(q, i, j);
            if v == f64::INFINITY {
                pos_inf += w;
            } else if v == f64::NEG_INFINITY {
                neg_inf += w;
            } else {
                pairs.push((v, w));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for (v, w) in pairs {
        match atoms.last_mut() {
            Some(last) if (v - last.0).abs() <= VALUE_MERGE_TOL => last.1 += w,
            _ => atoms.push((v, w)),
        }
    }
    if neg_inf > 0.0 {
        atoms.push((f64::NEG_INFINITY, neg_inf));
    }
    if pos_inf > 0.0 {
        atoms.push((f64::INFINITY, pos_inf));
    }
    DiscreteDistribution { atoms }
}

impl DiscreteDistribution {
    pub fn total_probability(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }

    pub fn infinite_weight(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|&&(v, _)| !v.is_finite())
            .map(|&(_, w)| w)
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|&&(v, _)| v.is_finite())
            .map(|&(v, w)| v * w)
            .sum()
    }
}

/// First four cumulants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CumulantSet {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa4: f64,
}

/// kappa_1..4 from central moments. Errors if non-finite atoms carry weight
/// >= 1e-14 (the divergent quantity is named in the error).
pub fn cumulants(dist: &DiscreteDistribution) -> Result<CumulantSet> {
    let inf_w = dist.infinite_weight();
    if inf_w >= 1e-14 {
        return Err(Error::InfiniteAtoms {
            what: "distribution".into(),
            weight: inf_w,
        });
    }
    let mean = dist.mean();
    let mut mu = [0.0_f64; 5];
    for &(v, w) in dist.atoms.iter().filter(|&&(v, _)| v.is_finite()) {
        let d = v - mean;
        let mut dk = d;
        for m in mu.iter_mut().skip(2) {
            dk *= d;
            *m += w * dk;
        }
    }
    Ok(CumulantSet {
        kappa1: mean,
        kappa2: mu[2],
        kappa3: mu[3],
        kappa4: mu[4] - 3.0 * mu[2] * mu[2],
    })
}

/// Exponential averages of the five stochastic quantities. The first four
/// obey integral fluctuation theorems; lambda_qu is reported but satisfies
/// one only in the infinitesimal-quench limit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FluctuationReport {
    pub exp_neg_sigma: f64,
    pub exp_neg_gamma_cl: f64,
    pub exp_neg_gamma_qu: f64,
    pub exp_neg_lambda_cl: f64,
    pub exp_neg_lambda_qu: f64,
}

pub fn fluctuation_theorem_check(table: &TrajectoryTable) -> FluctuationReport {
    FluctuationReport {
        exp_neg_sigma: table.exponential_average(Quantity::Sigma),
        exp_neg_gamma_cl: table.exponential_average(Quantity::GammaCl),
        exp_neg_gamma_qu: table.exponential_average(Quantity::GammaQu),
        exp_neg_lambda_cl: table.exponential_average(Quantity::LambdaCl),
        exp_neg_lambda_qu: table.exponential_average(Quantity::LambdaQu),
    }
}

/// Which joint CGF to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgfKind {
    /// K_sigma(v); u is ignored.
    Sigma,
    /// K_{gamma_cl, gamma_qu}(v, u)
    Gamma,
    /// K_{lambda_cl, lambda_qu}(v, u)
    Lambda,
}

/// Trace-formula CGF:
///
///   K_sigma(v)       = ln tr (rho_tau_th)^v (rho_tau)^{1-v}
///   K_gamma(v, u)    = ln tr (rho_tau_th)^v [D_{H_tau}(rho_tau)]^{u-v} (rho_tau)^{1-u}
///   K_lambda(v, u)   = ln tr (rho_tau_th)^u (rho_tilde_th)^{v-u} (rho_tau)^{1-v}
///
/// Matrix powers come from exact log-populations; a negative power against a
/// population below the support threshold returns +inf.
pub fn cgf_trace(p: &WorkProtocol, kind: CgfKind, v: f64, u: f64) -> Result<f64> {
    let sp = ProtocolSpectra::build(p)?;
    cgf_trace_from_spectra(&sp, kind, v, u)
}

fn power_matrix(basis: &DMatrix<Complex64>, log_p: &[f64], a: f64) -> Option<DMatrix<Complex64>> {
    let n = basis.nrows();
    // negative power against an (effectively) null population diverges
    if a < 0.0 && log_p.iter().any(|&l| l < crate::operators::SUPPORT_TOL.ln()) {
        return None;
    }
    let mut scaled = basis.clone();
    for j in 0..n {
        let w = if a == 0.0 { 1.0 } else { (a * log_p[j]).exp() };
        let c = Complex64::new(w, 0.0);
        for i in 0..n {
            scaled[(i, j)] *= c;
        }
    }
    Some(scaled * basis.adjoint())
}

pub(crate) fn cgf_trace_from_spectra(
    sp: &ProtocolSpectra,
    kind: CgfKind,
    v: f64,
    u: f64,
) -> Result<f64> {
    let (a, b, c) = match kind {
        CgfKind::Sigma => (
            power_matrix(&sp.v_tau, &sp.log_ptau, v),
            Some(DMatrix::identity(sp.dim, sp.dim)),
            power_matrix(&sp.psi, &sp.log_p0, 1.0 - v),
        ),
        CgfKind::Gamma => (
            power_matrix(&sp.v_tau, &sp.log_ptau, v),
            power_matrix(&sp.v_tau, &sp.log_q, u - v),
            power_matrix(&sp.psi, &sp.log_p0, 1.0 - u),
        ),
        CgfKind::Lambda => (
            power_matrix(&sp.v_tau, &sp.log_ptau, u),
            power_matrix(&sp.psi, &sp.log_ptilde, v - u),
            power_matrix(&sp.psi, &sp.log_p0, 1.0 - v),
        ),
    };
    let (Some(a), Some(b), Some(c)) = (a, b, c) else {
        return Ok(f64::INFINITY);
    };
    let prod = a * b * c;
    let tr: f64 = (0..prod.nrows()).map(|i| prod[(i, i)].re).sum();
    if tr <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(tr.ln())
}

/// Empirical CGF ln sum_ij P_F e^{-v X - u Y} directly from the table; the
/// independent oracle for [`cgf_trace`].
pub fn cgf_empirical(table: &TrajectoryTable, kind: CgfKind, v: f64, u: f64) -> f64 {
    let n = table.dim();
    let mut terms = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let w = table.joint()[(i, j)];
            if w <= 0.0 {
                continue;
            }
            let exponent = match kind {
                CgfKind::Sigma => -v * table.value(Quantity::Sigma, i, j),
                CgfKind::Gamma => {
                    -v * table.value(Quantity::GammaCl, i, j)
                        - u * table.value(Quantity::GammaQu, i, j)
                }
                CgfKind::Lambda => {
                    -v * table.value(Quantity::LambdaCl, i, j)
                        - u * table.value(Quantity::LambdaQu, i, j)
                }
            };
            terms.push(w.ln() + exponent);
        }
    }
    log_sum_exp(&terms)
}

/// A binned view of a discrete distribution for figure reproduction.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Probability mass per bin (not density).
    pub masses: Vec<f64>,
}

/// Bins the finite atoms. `bin_width = None` uses the Freedman–Diaconis rule
/// on the weighted atom set (2 IQR / n^{1/3} with n the number of atoms).
pub fn histogram(dist: &DiscreteDistribution, bin_width: Option<f64>) -> Result<Histogram> {
    let finite: Vec<(f64, f64)> = dist
        .atoms
        .iter()
        .copied()
        .filter(|&(v, _)| v.is_finite())
        .collect();
    if finite.is_empty() {
        return Err(Error::InvalidParameter(
            "histogram of an empty distribution".into(),
        ));
    }
    let lo = finite.first().unwrap().0;
    let hi = finite.last().unwrap().0;
    let width = match bin_width {
        Some(w) if w > 0.0 => w,
        Some(w) => {
            return Err(Error::InvalidParameter(format!(
                "bin width {w} must be positive"
            )))
        }
        None => {
            let iqr = weighted_quantile(&finite, 0.75) - weighted_quantile(&finite, 0.25);
            let n = finite.len() as f64;
            let fd = 2.0 * iqr / n.cbrt();
            if fd > 0.0 {
                fd
            } else {
                ((hi - lo) / 10.0).max(f64::MIN_POSITIVE)
            }
        }
    };
    let bins = (((hi - lo) / width).ceil() as usize).max(1);
    let mut edges = Vec::with_capacity(bins + 1);
    for k in 0..=bins {
        edges.push(lo + width * k as f64);
    }
    let mut masses = vec![0.0; bins];
    for &(v, w) in &finite {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        masses[idx] += w;
    }
    Ok(Histogram { edges, masses })
}

fn weighted_quantile(sorted_atoms: &[(f64, f64)], q: f64) -> f64 {
    let total: f64 = sorted_atoms.iter().map(|&(_, w)| w).sum();
    let target = q * total;
    let mut acc = 0.0;
    for &(v, w) in sorted_atoms {
        acc += w;
        if acc >= target {
            return v;
        }
    }
    sorted_atoms.last().unwrap().0
}
