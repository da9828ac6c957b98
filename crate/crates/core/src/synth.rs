//! Simulation from the model's own data-generating process.
//!
//! Each event solves the structural system
//! `y_t = (I - rho_t W_t)^{-1} (Z_t theta_t + eps_t)` for given coefficient paths,
//! dependence path and error variances. The truth record is written next to the data.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{PanelData, WeightSequence};
use crate::impacts::{effect_summary, impact_matrix};
use crate::ingest::{self, PANEL_FILE};
use crate::linalg::{log_det_i_minus, standard_normal};

pub const TRUTH_FILE: &str = "truth.json";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("I - rho W not invertible with positive determinant at event {t} (rho = {rho})")]
    NotInvertible { t: usize, rho: f64 },
    #[error("invalid simulation spec: {0}")]
    Spec(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightGenerator {
    /// Each unit splits its weight equally between its two ring neighbours.
    Ring,
    /// Zero diagonal, independent uniform off-diagonal entries, rows normalized.
    RandomRowStochastic,
    /// First matrix of a weight manifest.
    FromFile(PathBuf),
}

/// i.i.d. Gaussian common shock `v_t ~ N(mean, sd^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockGenerator {
    pub mean: f64,
    pub sd: f64,
}

impl Default for ShockGenerator {
    fn default() -> Self {
        Self { mean: 0.0, sd: 0.25 }
    }
}

/// Data-generating process. Covariate 1 is the common shock; covariates `2..=K` are
/// unit-specific standard normals.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub n: usize,
    pub t: usize,
    pub k: usize,
    /// `rho_t` per event (length `T`) or a single constant value.
    pub rho: Vec<f64>,
    /// Per unit, a `T x (K+1)` coefficient path `theta_it = (alpha_it, beta_it')`.
    pub theta: Vec<DMatrix<f64>>,
    /// Error variances; zero gives a noiseless panel.
    pub sigma_sq: Vec<f64>,
    pub weights: WeightGenerator,
    pub shock: ShockGenerator,
    pub seed: u64,
}

impl DgpSpec {
    /// Constant coefficients `theta` (length `K+1`) for every unit and event.
    pub fn constant(n: usize, t: usize, theta: &[f64], rho: f64, sigma_sq: f64, seed: u64) -> Self {
        let row = DMatrix::from_fn(t, theta.len(), |_, j| theta[j]);
        Self {
            n,
            t,
            k: theta.len() - 1,
            rho: vec![rho],
            theta: vec![row; n],
            sigma_sq: vec![sigma_sq; n],
            weights: WeightGenerator::Ring,
            shock: ShockGenerator::default(),
            seed,
        }
    }

    pub fn rho_at(&self, t: usize) -> f64 {
        if self.rho.len() == 1 {
            self.rho[0]
        } else {
            self.rho[t]
        }
    }

    fn check(&self) -> Result<(), SynthError> {
        let p = self.k + 1;
        let bad = |m: String| Err(SynthError::Spec(m));
        if self.n == 0 || self.t < 2 || self.k == 0 {
            return bad(format!("need N >= 1, T >= 2, K >= 1 (got {}, {}, {})", self.n, self.t, self.k));
        }
        if self.rho.len() != 1 && self.rho.len() != self.t {
            return bad(format!("rho has length {}, expected 1 or {}", self.rho.len(), self.t));
        }
        if self.theta.len() != self.n || self.theta.iter().any(|m| m.shape() != (self.t, p)) {
            return bad(format!("theta must hold {} matrices of shape ({}, {p})", self.n, self.t));
        }
        if self.sigma_sq.len() != self.n || self.sigma_sq.iter().any(|v| !(*v >= 0.0)) {
            return bad(format!("sigma_sq must hold {} non-negative values", self.n));
        }
        if !(self.shock.sd >= 0.0) {
            return bad("shock sd must be non-negative".into());
        }
        Ok(())
    }
}

/// Ground truth of a simulated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    /// `rho_t` per event.
    pub rho: Vec<f64>,
    /// `[unit][event][coef]`.
    pub theta: Vec<Vec<Vec<f64>>>,
    pub sigma_sq: Vec<f64>,
    pub shock: Vec<f64>,
    /// Unit- and time-averaged direct, indirect and total effect of covariate 1.
    pub avg_direct: f64,
    pub avg_indirect: f64,
    pub avg_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub panel: PanelData,
    pub weights: WeightSequence,
    pub truth: Truth,
}

/// Roughly FOMC-spaced event dates starting in February 1994.
pub fn event_dates(t: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(1994, 2, 4).unwrap();
    (0..t)
        .map(|k| start + chrono::Duration::days(45 * k as i64))
        .collect()
}

pub fn unit_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("u{i:02}")).collect()
}

pub fn ring_matrix(n: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        w[(i, (i + 1) % n)] += 0.5;
        w[(i, (i + n - 1) % n)] += 0.5;
    }
    w
}

pub fn random_row_stochastic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    let mut w = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random::<f64>() });
    for i in 0..n {
        let s = w.row(i).sum();
        w.row_mut(i).scale_mut(1.0 / s);
    }
    w
}

/// Gaussian random-walk paths `theta_it = theta_i0 + sqrt(omega_i) * theta_tilde_it`,
/// with `theta_tilde` a standard random walk started at zero.
pub fn random_walk_paths<R: Rng + ?Sized>(
    theta0: &DMatrix<f64>,
    omega_sqrt: &DMatrix<f64>,
    t: usize,
    rng: &mut R,
) -> Vec<DMatrix<f64>> {
    let (n, p) = theta0.shape();
    (0..n)
        .map(|i| {
            let mut m = DMatrix::zeros(t, p);
            for j in 0..p {
                let mut walk = 0.0;
                for tt in 0..t {
                    walk += standard_normal(rng);
                    m[(tt, j)] = theta0[(i, j)] + omega_sqrt[(i, j)] * walk;
                }
            }
            m
        })
        .collect()
}

/// `rho_1..rho_T` from `rho_t = rho_{t-1} + varsigma xi_t`.
pub fn random_walk_rho<R: Rng + ?Sized>(rho0: f64, varsigma_sq: f64, t: usize, rng: &mut R) -> Vec<f64> {
    let sd = varsigma_sq.sqrt();
    let mut r = rho0;
    (0..t)
        .map(|_| {
            r += sd * standard_normal(rng);
            r
        })
        .collect()
}

fn build_weights<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<DMatrix<f64>, SynthError> {
    Ok(match &spec.weights {
        WeightGenerator::Ring => ring_matrix(spec.n),
        WeightGenerator::RandomRowStochastic => random_row_stochastic(spec.n, rng),
        WeightGenerator::FromFile(p) => {
            let seq = ingest::read_weight_manifest(p).map_err(|e| SynthError::Io(e.to_string()))?;
            let m = seq.entries[0].matrix.clone();
            if m.nrows() != spec.n {
                return Err(SynthError::Spec(format!(
                    "{} holds an {}x{} matrix, N = {}",
                    p.display(),
                    m.nrows(),
                    m.ncols(),
                    spec.n
                )));
            }
            m
        }
    })
}

pub fn simulate(spec: &DgpSpec) -> Result<Simulated, SynthError> {
    spec.check()?;
    let (n, t_len, k) = (spec.n, spec.t, spec.k);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let w = build_weights(spec, &mut rng)?;

    let shock: Vec<f64> = (0..t_len)
        .map(|_| spec.shock.mean + spec.shock.sd * standard_normal(&mut rng))
        .collect();
    let mut covariates = vec![DMatrix::from_fn(n, t_len, |_, t| shock[t])];
    for _ in 1..k {
        covariates.push(DMatrix::from_fn(n, t_len, |_, _| standard_normal(&mut rng)));
    }

    let mut responses = DMatrix::zeros(n, t_len);
    let (mut dsum, mut isum, mut tsum) = (0.0, 0.0, 0.0);
    for t in 0..t_len {
        let rho = spec.rho_at(t);
        if log_det_i_minus(&w, rho).is_none() {
            return Err(SynthError::NotInvertible { t, rho });
        }
        let rhs = DVector::from_fn(n, |i, _| {
            let th = &spec.theta[i];
            let mut v = th[(t, 0)];
            for c in 0..k {
                v += th[(t, c + 1)] * covariates[c][(i, t)];
            }
            v + spec.sigma_sq[i].sqrt() * standard_normal(&mut rng)
        });
        let m = DMatrix::<f64>::identity(n, n) - &w * rho;
        let y = m
            .lu()
            .solve(&rhs)
            .ok_or(SynthError::NotInvertible { t, rho })?;
        responses.set_column(t, &y);

        let betas = DVector::from_fn(n, |i, _| spec.theta[i][(t, 1)]);
        let e = effect_summary(
            &impact_matrix(rho, &w, &betas).map_err(|_| SynthError::NotInvertible { t, rho })?,
        );
        dsum += e.avg_direct;
        isum += e.avg_indirect;
        tsum += e.avg_total;
    }

    let ids = unit_ids(n);
    let tf = t_len as f64;
    let truth = Truth {
        seed: spec.seed,
        rho: (0..t_len).map(|t| spec.rho_at(t)).collect(),
        theta: spec
            .theta
            .iter()
            .map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect())
            .collect(),
        sigma_sq: spec.sigma_sq.clone(),
        shock,
        avg_direct: dsum / tf,
        avg_indirect: isum / tf,
        avg_total: tsum / tf,
    };
    Ok(Simulated {
        panel: PanelData {
            responses,
            covariates,
            unit_ids: ids.clone(),
            event_dates: event_dates(t_len),
            common_shock: true,
        },
        weights: WeightSequence::constant(ids, w),
        truth,
    })
}

/// Writes `panel.csv`, the weight manifest and matrices, and `truth.json` into `dir`.
pub fn write_simulated(dir: &Path, sim: &Simulated) -> Result<(), SynthError> {
    let io = |e: ingest::IngestError| SynthError::Io(e.to_string());
    ingest::write_panel(&dir.join(PANEL_FILE), &sim.panel).map_err(io)?;
    ingest::write_weight_sequence(dir, &sim.weights).map_err(io)?;
    let json = serde_json::to_string_pretty(&sim.truth).map_err(|e| SynthError::Io(e.to_string()))?;
    std::fs::write(dir.join(TRUTH_FILE), json + "\n").map_err(|e| SynthError::Io(e.to_string()))
}

pub fn read_truth(path: &Path) -> Result<Truth, SynthError> {
    let text = std::fs::read_to_string(path).map_err(|e| SynthError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| SynthError::Io(format!("{}: {e}", path.display())))
}
