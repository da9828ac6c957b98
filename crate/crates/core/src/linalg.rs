//! Dense linear-algebra and random-variate helpers shared by the sampler,
//! the impact computations and the simulator.

use nalgebra::{Complex, DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Relative tolerance below which an eigenvalue's imaginary part is treated as zero.
const REAL_EIG_TOL: f64 = 1e-9;

/// `log det(I - rho * W)` via LU factorization with sign tracking.
///
/// Returns `None` when the determinant is zero or negative.
pub fn log_det_i_minus(w: &DMatrix<f64>, rho: f64) -> Option<f64> {
    let n = w.nrows();
    let m = DMatrix::<f64>::identity(n, n) - w * rho;
    let (log_abs, sign) = lu_log_det(m)?;
    (sign > 0.0).then_some(log_abs)
}

/// `(log|det A|, sign(det A))` from a partial-pivoting LU factorization.
/// `None` if `A` is singular.
pub fn lu_log_det(a: DMatrix<f64>) -> Option<(f64, f64)> {
    let lu = a.lu();
    let mut sign: f64 = lu.p().determinant();
    let mut log_abs = 0.0;
    let u = lu.u();
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        if d < 0.0 {
            sign = -sign;
        }
        log_abs += d.abs().ln();
    }
    Some((log_abs, sign))
}

/// Pre-computed eigenvalues of a weight matrix so that
/// `log det(I - rho W) = sum_k log|1 - rho * lambda_k|` costs O(N) per evaluation.
#[derive(Debug, Clone)]
pub struct SpectralLogDet {
    eigenvalues: Vec<Complex<f64>>,
}

impl SpectralLogDet {
    /// `None` when the real Schur iteration does not converge.
    pub fn new(w: &DMatrix<f64>) -> Option<Self> {
        let schur = Schur::try_new(w.clone(), f64::EPSILON, 10_000)?;
        let eigenvalues = schur.complex_eigenvalues().iter().copied().collect();
        Some(Self { eigenvalues })
    }

    pub fn eigenvalues(&self) -> &[Complex<f64>] {
        &self.eigenvalues
    }

    /// `log det(I - rho W)`, or `None` if the determinant is not strictly positive.
    pub fn log_det(&self, rho: f64) -> Option<f64> {
        let mut log_abs = 0.0;
        let mut negatives = 0usize;
        for lam in &self.eigenvalues {
            let f = Complex::new(1.0, 0.0) - lam * rho;
            let modulus = f.norm();
            if modulus == 0.0 {
                return None;
            }
            log_abs += modulus.ln();
            // complex pairs contribute |f|^2 > 0; only real factors can flip the sign
            if lam.im.abs() <= REAL_EIG_TOL * (1.0 + lam.re.abs()) && f.re < 0.0 {
                negatives += 1;
            }
        }
        (negatives % 2 == 0).then_some(log_abs)
    }
}

/// Log-determinant evaluator for one weight matrix: spectral when the eigen
/// decomposition is available, LU otherwise.
#[derive(Debug, Clone)]
pub enum LogDet {
    Spectral(SpectralLogDet),
    Lu(DMatrix<f64>),
}

impl LogDet {
    pub fn new(w: &DMatrix<f64>) -> Self {
        match SpectralLogDet::new(w) {
            Some(s) => LogDet::Spectral(s),
            None => LogDet::Lu(w.clone()),
        }
    }

    pub fn eval(&self, rho: f64) -> Option<f64> {
        match self {
            LogDet::Spectral(s) => s.log_det(rho),
            LogDet::Lu(w) => log_det_i_minus(w, rho),
        }
    }
}

/// Gaussian in canonical form: precision `P` and linear term `b`, mean `P^{-1} b`.
#[derive(Debug, Clone)]
pub struct GaussianPrecision {
    pub mean: DVector<f64>,
    chol_l: DMatrix<f64>,
}

impl GaussianPrecision {
    /// Fails when `precision` is not positive definite.
    pub fn new(precision: &DMatrix<f64>, linear: &DVector<f64>) -> Option<Self> {
        let chol = precision.clone().cholesky()?;
        let mean = chol.solve(linear);
        Some(Self {
            mean,
            chol_l: chol.l(),
        })
    }

    /// Posterior covariance `P^{-1}`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.chol_l.nrows();
        let linv = self
            .chol_l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("cholesky factor has positive diagonal");
        linv.transpose() * linv
    }

    /// `mean + L^{-T} z` with `z` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = standard_normal_vector(self.mean.len(), rng);
        let shift = self
            .chol_l
            .transpose()
            .solve_upper_triangular(&z)
            .expect("cholesky factor has positive diagonal");
        &self.mean + shift
    }
}

/// Draws from `N(mean, cov)`; adds diagonal jitter if `cov` is numerically semi-definite.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Option<DVector<f64>> {
    let n = mean.len();
    let sym = (cov + cov.transpose()) * 0.5;
    let mut jitter = 0.0;
    for _ in 0..8 {
        let c = &sym + DMatrix::identity(n, n) * jitter;
        if let Some(chol) = c.cholesky() {
            let z = standard_normal_vector(n, rng);
            return Some(mean + chol.l() * z);
        }
        let scale = sym.diagonal().amax().max(1.0);
        jitter = if jitter == 0.0 { 1e-14 * scale } else { jitter * 100.0 };
    }
    None
}

pub fn standard_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draw from InvGamma(shape, rate), i.e. `1 / Gamma(shape, scale = 1/rate)`.
pub fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / rate).expect("inverse gamma parameters must be positive");
    1.0 / g.sample(rng)
}

/// Mean of InvGamma(shape, rate); infinite for shape <= 1.
pub fn inv_gamma_mean(shape: f64, rate: f64) -> f64 {
    if shape > 1.0 {
        rate / (shape - 1.0)
    } else {
        f64::INFINITY
    }
}

/// Independent random substream `stream` under `key`.
pub fn substream(key: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng
}

/// Reciprocal condition-number estimate of a symmetric positive semi-definite matrix
/// from its eigenvalues; `0` when singular.
pub fn rcond_symmetric(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if max == 0.0 || min <= 0.0 {
        0.0
    } else {
        min / max
    }
}
