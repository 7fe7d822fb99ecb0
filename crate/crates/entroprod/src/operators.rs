//! Dense Hermitian linear algebra: spectral decompositions, Gibbs states,
//! entropies, the dephasing and J superoperators, and skew information.
//!
//! Matrix functions (exp, log, powers) always go through the spectral
//! decomposition; series expansions would lose the thermal tails that the
//! low-temperature regime lives on.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::stable::{log_mean, log_sum_exp};

/// Relative eigenvalue-clustering tolerance: two eigenvalues belong to the
/// same degenerate cluster when their gap is below this fraction of the
/// spectral range.
pub const DEFAULT_DEGENERACY_REL_TOL: f64 = 1e-9;

/// Populations below this threshold count as outside the support when taking
/// logarithms or negative powers.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Hermiticity validation tolerance, relative to the largest entry magnitude.
pub const HERMITICITY_REL_TOL: f64 = 1e-12;

const UNITARITY_TOL: f64 = 1e-10;
const DENSITY_TOL: f64 = 1e-10;

fn check_square(m: &DMatrix<Complex64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// A validated Hermitian matrix. Entries are exactly symmetrized on
/// construction so downstream spectral code sees `A = A^dag` to the bit.
#[derive(Debug, Clone)]
pub struct HermitianMatrix {
    mat: DMatrix<Complex64>,
}

impl HermitianMatrix {
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        let n = check_square(&mat)?;
        let mut max_abs = 0.0_f64;
        let mut max_dev = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                max_abs = max_abs.max(mat[(i, j)].norm());
                max_dev = max_dev.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
            }
        }
        let tol = HERMITICITY_REL_TOL * max_abs.max(1.0);
        if max_dev > tol {
            return Err(Error::NotHermitian {
                deviation: max_dev,
                tol,
            });
        }
        let sym = (&mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
        Ok(HermitianMatrix { mat: sym })
    }

    /// Builds from real entries (must be symmetric).
    pub fn from_real(mat: DMatrix<f64>) -> Result<Self> {
        Self::new(mat.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        HermitianMatrix { mat: m }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }

    /// Spectral decomposition with the default degeneracy tolerance
    /// (1e-9 of the spectral range).
    pub fn spectral(&self) -> SpectralDecomposition {
        let probe = eigh(&self.mat);
        let range = probe.1.last().unwrap() - probe.1[0];
        spectral_from_eigh(probe, DEFAULT_DEGENERACY_REL_TOL * range.max(0.0))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }
}

/// Eigenvalues (ascending), an orthonormal eigenbasis, and the degenerate
/// cluster each eigenvalue belongs to.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<Complex64>,
    cluster_index: Vec<usize>,
}

/// Sorted eigendecomposition of a Hermitian matrix.
fn eigh(m: &DMatrix<Complex64>) -> (DMatrix<Complex64>, Vec<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vals = Vec::with_capacity(n);
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &idx) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[idx]);
        vecs.set_column(col, &eig.eigenvectors.column(idx));
    }
    (vecs, vals)
}

fn spectral_from_eigh(
    (vectors, eigenvalues): (DMatrix<Complex64>, Vec<f64>),
    gap_tol: f64,
) -> SpectralDecomposition {
    // single linkage on the sorted eigenvalues
    let mut cluster_index = Vec::with_capacity(eigenvalues.len());
    let mut current = 0usize;
    for i in 0..eigenvalues.len() {
        if i > 0 && (eigenvalues[i] - eigenvalues[i - 1]).abs() > gap_tol {
            current += 1;
        }
        cluster_index.push(current);
    }
    SpectralDecomposition {
        eigenvalues,
        vectors,
        cluster_index,
    }
}

/// Decomposes a Hermitian matrix; `degeneracy_tol` is the absolute gap below
/// which adjacent eigenvalues merge into one cluster.
pub fn spectral_decompose(h: &HermitianMatrix, degeneracy_tol: f64) -> SpectralDecomposition {
    spectral_from_eigh(eigh(h.matrix()), degeneracy_tol)
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    pub fn cluster_index(&self) -> &[usize] {
        &self.cluster_index
    }

    /// Contiguous index ranges of the degenerate clusters, in spectral order.
    pub fn cluster_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.cluster_index.len() {
            if i == self.cluster_index.len() || self.cluster_index[i] != self.cluster_index[start] {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    /// V diag(eps) V^dag.
    pub fn reconstruct(&self) -> HermitianMatrix {
        HermitianMatrix {
            mat: self.function_matrix(|x| x),
        }
    }

    /// V diag(f(eps)) V^dag as a raw matrix.
    pub fn function_matrix(&self, f: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fe = Complex64::new(f(self.eigenvalues[j]), 0.0);
            for i in 0..n {
                scaled[(i, j)] *= fe;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// V diag(g(eps)) V^dag for complex-valued g (used for e^{-i eps t}).
    pub fn complex_function_matrix(&self, g: impl Fn(f64) -> Complex64) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fe = g(self.eigenvalues[j]);
            for i in 0..n {
                scaled[(i, j)] *= fe;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// A validated density matrix (Hermitian, unit trace, PSD up to 1e-10).
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        let h = HermitianMatrix::new(mat).map_err(|e| Error::InvalidDensity {
            reason: e.to_string(),
        })?;
        let tr = h.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::InvalidDensity {
                reason: format!("trace = {tr} is not 1"),
            });
        }
        let spec = h.spectral();
        if spec.eigenvalues()[0] < -DENSITY_TOL {
            return Err(Error::InvalidDensity {
                reason: format!("negative eigenvalue {:.3e}", spec.eigenvalues()[0]),
            });
        }
        Ok(DensityMatrix { mat: h.mat })
    }

    /// Skips validation; for internal construction from spectral data.
    pub fn new_unchecked(mat: DMatrix<Complex64>) -> Self {
        DensityMatrix { mat }
    }

    /// sum_i p_i |v_i><v_i| from an orthonormal basis and populations.
    pub fn from_populations(basis: &DMatrix<Complex64>, populations: &[f64]) -> Self {
        let n = basis.nrows();
        let mut scaled = basis.clone();
        for j in 0..n {
            let p = Complex64::new(populations[j], 0.0);
            for i in 0..n {
                scaled[(i, j)] *= p;
            }
        }
        DensityMatrix {
            mat: scaled * basis.adjoint(),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        DensityMatrix { mat: m }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    /// Eigenvalues clamped to [0, 1], ascending, with eigenvectors.
    pub fn spectral(&self) -> (DMatrix<Complex64>, Vec<f64>) {
        let (v, mut w) = eigh(&self.mat);
        for x in &mut w {
            *x = x.clamp(0.0, 1.0);
        }
        (v, w)
    }
}

/// A validated unitary matrix.
#[derive(Debug, Clone)]
pub struct UnitaryMatrix {
    mat: DMatrix<Complex64>,
}

impl UnitaryMatrix {
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        let n = check_square(&mat)?;
        let gram = mat.adjoint() * &mat;
        let mut dev = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((gram[(i, j)] - Complex64::new(expected, 0.0)).norm());
            }
        }
        if dev > UNITARITY_TOL {
            return Err(Error::NotUnitary { deviation: dev });
        }
        Ok(UnitaryMatrix { mat })
    }

    /// Skips validation. Used by negative-control tests that inject a
    /// corrupted unitary to exercise downstream detection.
    pub fn new_unchecked(mat: DMatrix<Complex64>) -> Self {
        UnitaryMatrix { mat }
    }

    pub fn identity(dim: usize) -> Self {
        UnitaryMatrix {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }
}

/// exp(-i t G) through the spectral decomposition of the Hermitian generator;
/// unitary to machine precision by construction.
pub fn evolution_unitary(generator: &HermitianMatrix, t: f64) -> UnitaryMatrix {
    let spec = generator.spectral();
    let u = spec.complex_function_matrix(|e| Complex64::from_polar(1.0, -t * e));
    UnitaryMatrix { mat: u }
}

/// A Gibbs state together with ln Z.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub rho: DensityMatrix,
    pub ln_z: f64,
}

/// e^{-beta H}/Z, computed spectrally with the max-eigenvalue shift so the
/// weights never underflow relative to the largest one.
pub fn gibbs_state(h: &HermitianMatrix, beta: f64) -> Result<GibbsState> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidBeta { beta });
    }
    let spec = h.spectral();
    let (log_p, ln_z) = log_populations(spec.eigenvalues(), beta);
    let pops: Vec<f64> = log_p.iter().map(|&l| l.exp()).collect();
    Ok(GibbsState {
        rho: DensityMatrix::from_populations(spec.vectors(), &pops),
        ln_z,
    })
}

/// (ln p_i, ln Z) for Boltzmann weights at inverse temperature beta;
/// exact in log space at any beta.
pub fn log_populations(eigenvalues: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let neg: Vec<f64> = eigenvalues.iter().map(|&e| -beta * e).collect();
    let ln_z = log_sum_exp(&neg);
    (neg.iter().map(|&x| x - ln_z).collect(), ln_z)
}

/// Block-projects `m` onto the degenerate eigenspaces of `basis`:
/// sum_alpha Pi_alpha m Pi_alpha.
pub(crate) fn dephase_matrix(
    m: &DMatrix<Complex64>,
    basis: &SpectralDecomposition,
) -> DMatrix<Complex64> {
    let n = basis.dim();
    let rotated = basis.vectors().adjoint() * m * basis.vectors();
    let mut blocks = DMatrix::zeros(n, n);
    for range in basis.cluster_ranges() {
        for i in range.clone() {
            for j in range.clone() {
                blocks[(i, j)] = rotated[(i, j)];
            }
        }
    }
    basis.vectors() * blocks * basis.vectors().adjoint()
}

/// Dephasing of a Hermitian observable in the eigenbasis of `basis`.
/// Idempotent, trace-preserving, and commutes with the reference operator.
pub fn dephase(a: &HermitianMatrix, basis: &SpectralDecomposition) -> Result<HermitianMatrix> {
    if a.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: basis.dim(),
        });
    }
    let m = dephase_matrix(a.matrix(), basis);
    Ok(HermitianMatrix {
        mat: (&m + m.adjoint()) * Complex64::new(0.5, 0.0),
    })
}

/// Dephasing of a density matrix in the eigenbasis of `basis`.
pub fn dephase_density(rho: &DensityMatrix, basis: &SpectralDecomposition) -> Result<DensityMatrix> {
    if rho.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: basis.dim(),
        });
    }
    let m = dephase_matrix(rho.matrix(), basis);
    Ok(DensityMatrix {
        mat: (&m + m.adjoint()) * Complex64::new(0.5, 0.0),
    })
}

/// -tr(rho ln rho) in nats, with 0 ln 0 = 0. Lands in [0, ln d].
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let (_, w) = rho.spectral();
    -w.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// tr rho (ln rho - ln sigma). Returns +inf when the support of rho is not
/// contained in the support of sigma (threshold [`SUPPORT_TOL`]).
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        });
    }
    let (_, wr) = rho.spectral();
    let (vs, ws) = sigma.spectral();
    // weight of rho along each eigenvector of sigma
    let rot = vs.adjoint() * rho.matrix() * &vs;
    let mut t2 = 0.0;
    for (j, &q) in ws.iter().enumerate() {
        let weight = rot[(j, j)].re;
        if q < SUPPORT_TOL {
            if weight > SUPPORT_TOL {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        t2 += weight * q.ln();
    }
    let t1: f64 = wr.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum();
    Ok(t1 - t2)
}

/// Finite-vs-divergent outcome of a spectral trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceValue {
    Finite(f64),
    Divergent,
}

impl TraceValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            TraceValue::Finite(v) => Some(v),
            TraceValue::Divergent => None,
        }
    }
}

/// Matrix power in spectral form; flags divergence when a negative power hits
/// a null eigenvalue.
fn spectral_power(v: &DMatrix<Complex64>, w: &[f64], a: f64) -> Option<DMatrix<Complex64>> {
    if a < 0.0 && w.iter().any(|&p| p < SUPPORT_TOL) {
        return None;
    }
    let n = v.nrows();
    let mut scaled = v.clone();
    for j in 0..n {
        let pw = if w[j] <= 0.0 {
            if a == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (a * w[j].ln()).exp()
        };
        let c = Complex64::new(pw, 0.0);
        for i in 0..n {
            scaled[(i, j)] *= c;
        }
    }
    Some(scaled * v.adjoint())
}

/// tr(rho^v sigma^{1-v}) with eigenvalues clamped to [0, 1].
pub fn renyi_trace(rho: &DensityMatrix, sigma: &DensityMatrix, v: f64) -> Result<TraceValue> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        });
    }
    let (vr, wr) = rho.spectral();
    let (vs, ws) = sigma.spectral();
    let (Some(a), Some(b)) = (
        spectral_power(&vr, &wr, v),
        spectral_power(&vs, &ws, 1.0 - v),
    ) else {
        return Ok(TraceValue::Divergent);
    };
    let prod = a * b;
    let tr: f64 = (0..prod.nrows()).map(|i| prod[(i, i)].re).sum();
    Ok(TraceValue::Finite(tr))
}

/// J_rho[X] = int_0^1 rho^t X rho^{1-t} dt, evaluated in the eigenbasis of
/// rho where the element-wise kernel is the logarithmic mean of the
/// populations.
pub fn j_superoperator(rho: &DensityMatrix, x: &HermitianMatrix) -> Result<HermitianMatrix> {
    if rho.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: x.dim(),
        });
    }
    let (v, w) = rho.spectral();
    let n = rho.dim();
    let mut rotated = v.adjoint() * x.matrix() * &v;
    for i in 0..n {
        for j in 0..n {
            rotated[(i, j)] *= Complex64::new(log_mean(w[i], w[j]), 0.0);
        }
    }
    let back = &v * rotated * v.adjoint();
    Ok(HermitianMatrix {
        mat: (&back + back.adjoint()) * Complex64::new(0.5, 0.0),
    })
}

/// Wigner–Yanase–Dyson skew information
/// I^y(rho, X) = -1/2 tr([rho^y, X][rho^{1-y}, X]), y in (0, 1).
///
/// In the eigenbasis of rho this is a manifestly nonnegative sum over
/// |X_ij|^2 (p_i^y - p_j^y)(p_i^{1-y} - p_j^{1-y}).
pub fn skew_information(rho: &DensityMatrix, x: &HermitianMatrix, y: f64) -> Result<f64> {
    if rho.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: x.dim(),
        });
    }
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "skew information exponent y = {y} must lie in (0, 1)"
        )));
    }
    let (v, w) = rho.spectral();
    let rotated = v.adjoint() * x.matrix() * &v;
    let n = rho.dim();
    let py: Vec<f64> = w.iter().map(|&p| p.powf(y)).collect();
    let p1y: Vec<f64> = w.iter().map(|&p| p.powf(1.0 - y)).collect();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let a = py[i] - py[j];
            let b = p1y[i] - p1y[j];
            total += 0.5 * rotated[(i, j)].norm_sqr() * a * b;
        }
    }
    Ok(total)
}

/// Coherence measure Q = (beta/2) int_0^1 I^y(rho, X) dy by Gauss–Legendre
/// quadrature with the given node count (minimum 8).
pub fn coherence_q(
    rho: &DensityMatrix,
    x: &HermitianMatrix,
    beta: f64,
    nodes: usize,
) -> Result<f64> {
    if nodes < 8 {
        return Err(Error::InvalidParameter(format!(
            "coherence quadrature needs at least 8 nodes, got {nodes}"
        )));
    }
    if rho.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: x.dim(),
        });
    }
    // rotate once; reuse across quadrature nodes
    let (v, w) = rho.spectral();
    let rotated = v.adjoint() * x.matrix() * &v;
    let n = rho.dim();
    let quad = GaussLegendre::new(nodes);
    let integral = quad.integrate(0.0, 1.0, |y| {
        let py: Vec<f64> = w.iter().map(|&p| p.powf(y)).collect();
        let p1y: Vec<f64> = w.iter().map(|&p| p.powf(1.0 - y)).collect();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    total += 0.5 * rotated[(i, j)].norm_sqr() * (py[i] - py[j]) * (p1y[i] - p1y[j]);
                }
            }
        }
        total
    });
    Ok(0.5 * beta * integral)
}
