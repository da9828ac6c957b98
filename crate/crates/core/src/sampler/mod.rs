//! The five-step MCMC sweep.
//!
//! 1. coefficient paths `theta_tilde` by forward filtering, backward sampling;
//! 2. initial coefficients and signed innovation scales in one Gaussian block;
//! 3. error variances from their inverse-gamma conditionals;
//! 4. the network dependence path `rho_0..rho_T` by single-site Metropolis-Hastings;
//! 5. the random-walk variance `varsigma^2`.
//!
//! Units that share parameters (pooled variants) form one group whose sufficient
//! statistics are summed before a single draw. Steps 1-3 run per group on independent
//! random substreams keyed by the sweep, so parallel and sequential execution agree
//! bit for bit.

mod chain;
pub mod ffbs;
mod regression;
mod rho;

pub use chain::{chain_seed, run_chains, run_mcmc, run_validated};
pub use regression::{ols, OlsFit, MIN_PRIOR_VAR, OLS_RIDGE};
pub use rho::{rho_proposal, varsigma_posterior, ProposalCase, QuadStats, RhoProposalMoments};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::data_model::{ModelConfig, NetworkMode, PanelData, ParameterState, Validated};
use crate::linalg::{
    rcond_symmetric, sample_inv_gamma, standard_normal, substream, GaussianPrecision, LogDet,
};
use crate::par;

/// Scale of the random-walk proposal for a time-constant `rho`, relative to the
/// approximate posterior standard deviation.
pub const CONSTANT_RHO_STEP: f64 = 2.38;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("non-positive error variance {value} for unit {unit}")]
    NonPositiveVariance { unit: String, value: f64 },
    #[error("singular posterior precision for coefficient group {group} (reciprocal condition number {rcond:e})")]
    SingularPosterior { group: usize, rcond: f64 },
    #[error("current rho_{t} = {rho} has zero likelihood (det(I - rho W) <= 0); chain aborted")]
    InvalidState { t: usize, rho: f64 },
    #[error("proposal index t = {t} outside 0..={t_max}")]
    ProposalIndex { t: usize, t_max: usize },
}

/// Outcome of the Metropolis-Hastings pass over `rho`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RhoMove {
    /// No network term; nothing drawn.
    Skipped,
    /// Acceptance of the single time-constant `rho`.
    Constant(bool),
    /// Acceptance of `rho_1 .. rho_T`.
    Path(Vec<bool>),
}

/// Precomputed model quantities for one validated input bundle.
pub struct Sampler<'a> {
    panel: &'a PanelData,
    config: &'a ModelConfig,
    groups: Vec<Vec<usize>>,
    prior_var: Vec<DVector<f64>>,
    /// `N x T` network lags `(W_t y_t)_i`, zero without a network.
    lag: DMatrix<f64>,
    logdet: Vec<LogDet>,
    weight_index: Vec<usize>,
}

impl<'a> Sampler<'a> {
    pub fn new(v: &Validated<'a>) -> Self {
        let panel = v.panel;
        let config = v.config;
        let (n, t_len) = (panel.n_units(), panel.n_periods());
        let groups: Vec<Vec<usize>> = if config.heterogeneity.pools_units() {
            vec![(0..n).collect()]
        } else {
            (0..n).map(|i| vec![i]).collect()
        };
        let networked = config.network != NetworkMode::None;
        let mut lag = DMatrix::zeros(n, t_len);
        let mut logdet = Vec::new();
        if networked {
            let w = v.weights.expect("validated network inputs carry weights");
            for t in 0..t_len {
                let l = v.weight_at(t).unwrap() * panel.responses.column(t);
                lag.set_column(t, &l);
            }
            logdet = w.entries.iter().map(|e| LogDet::new(&e.matrix)).collect();
        }
        let prior_var = groups
            .iter()
            .map(|g| group_ols(panel, g).coef_var)
            .collect();
        Self {
            panel,
            config,
            groups,
            prior_var,
            lag,
            logdet,
            weight_index: v.weight_schedule().to_vec(),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        self.config
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Least-squares coefficient variances `V_g` scaling both coefficient priors.
    pub fn prior_variances(&self, g: usize) -> &DVector<f64> {
        &self.prior_var[g]
    }

    pub fn network_lag(&self) -> &DMatrix<f64> {
        &self.lag
    }

    fn tvp(&self) -> bool {
        self.config.heterogeneity.time_varying()
    }

    fn p(&self) -> usize {
        self.panel.n_coefs()
    }

    fn t_len(&self) -> usize {
        self.panel.n_periods()
    }

    /// Starting values: least-squares coefficients per group, innovation scales 0.01
    /// (0 without time variation), residual variances, `rho = 0`, `varsigma^2` at its
    /// prior mean.
    pub fn initial_state(&self) -> ParameterState {
        let (n, t_len, p) = (self.panel.n_units(), self.t_len(), self.p());
        let mut s = ParameterState::zeros(n, t_len, p);
        let omega = if self.tvp() { 0.01 } else { 0.0 };
        for g in &self.groups {
            let fit = group_ols(self.panel, g);
            for &i in g {
                for j in 0..p {
                    s.theta0[(i, j)] = fit.coef[j];
                    s.omega_sqrt[(i, j)] = omega;
                }
                s.sigma_sq[i] = fit.resid_var.max(1e-8);
            }
        }
        let pr = &self.config.priors;
        s.varsigma_sq = if pr.c_varsigma > 1.0 {
            pr.d_varsigma / (pr.c_varsigma - 1.0)
        } else {
            pr.d_varsigma
        };
        s
    }

    #[inline]
    fn fitted(&self, s: &ParameterState, i: usize, t: usize) -> f64 {
        (0..self.p()).map(|j| self.panel.z(i, t, j) * s.theta(i, t, j)).sum()
    }

    /// `y*_it = y_it - rho_t (W_t y_t)_i`.
    #[inline]
    fn ystar(&self, s: &ParameterState, i: usize, t: usize) -> f64 {
        self.panel.responses[(i, t)] - s.rho_at(t) * self.lag[(i, t)]
    }

    fn check_variances(&self, s: &ParameterState) -> Result<(), SamplerError> {
        match s.sigma_sq.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            Some(i) => Err(SamplerError::NonPositiveVariance {
                unit: self.panel.unit_ids[i].clone(),
                value: s.sigma_sq[i],
            }),
            None => Ok(()),
        }
    }

    // -- step 1 -------------------------------------------------------------

    /// Layout of the state-space model for group `g`: loadings `z_it * sqrt(omega)`,
    /// observations `y*_it - z_it' theta_0`.
    pub fn tvp_state_space(&self, s: &ParameterState, g: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (p, t_len) = (self.p(), self.t_len());
        let units = &self.groups[g];
        let m = units.len();
        let mut h = vec![0.0; t_len * m * p];
        let mut y = vec![0.0; t_len * m];
        for t in 0..t_len {
            for (k, &i) in units.iter().enumerate() {
                let mut base = 0.0;
                for j in 0..p {
                    let z = self.panel.z(i, t, j);
                    h[(t * m + k) * p + j] = z * s.omega_sqrt[(i, j)];
                    base += z * s.theta0[(i, j)];
                }
                y[t * m + k] = self.ystar(s, i, t) - base;
            }
        }
        let var = units.iter().map(|&i| s.sigma_sq[i]).collect();
        (h, y, var)
    }

    /// Joint draw of every group's `theta_tilde` path. A no-op without time variation.
    pub fn draw_tvp_paths<R: Rng + ?Sized>(
        &self,
        s: &mut ParameterState,
        rng: &mut R,
    ) -> Result<(), SamplerError> {
        if !self.tvp() {
            return Ok(());
        }
        self.check_variances(s)?;
        let key = rng.next_u64();
        let (p, t_len) = (self.p(), self.t_len());
        let state = &*s;
        let paths = par::map_range(self.groups.len(), |g| {
            let (h, y, var) = self.tvp_state_space(state, g);
            let ss = ffbs::StateSpace {
                p,
                t_len,
                m: self.groups[g].len(),
                h: &h,
                y: &y,
                var: &var,
            };
            let f = ffbs::kalman_filter(&ss);
            ffbs::backward_sample(&f, &mut substream(key, g as u64))
        });
        for (g, path) in paths.into_iter().enumerate() {
            let m = DMatrix::from_row_slice(t_len, p, &path);
            for &i in &self.groups[g] {
                s.theta_tilde[i].copy_from(&m);
            }
        }
        Ok(())
    }

    // -- step 2 -------------------------------------------------------------

    /// Conditional posterior of `(theta_0, sqrt(omega))` for group `g` (of `theta_0` only
    /// without time variation): regression of `y*` on `[z, z * theta_tilde]` with priors
    /// `N(0, a V_g)` and `N(0, b V_g)`.
    pub fn base_and_scales_posterior(
        &self,
        s: &ParameterState,
        g: usize,
    ) -> Result<GaussianPrecision, SamplerError> {
        let p = self.p();
        let q = if self.tvp() { 2 * p } else { p };
        let pr = &self.config.priors;
        let v = &self.prior_var[g];
        let mut prec = DMatrix::zeros(q, q);
        let mut lin = DVector::zeros(q);
        for j in 0..p {
            prec[(j, j)] = 1.0 / (pr.a * v[j]);
            if q > p {
                prec[(p + j, p + j)] = 1.0 / (pr.b * v[j]);
            }
        }
        let mut x = vec![0.0; q];
        for &i in &self.groups[g] {
            let w = 1.0 / s.sigma_sq[i];
            for t in 0..self.t_len() {
                for j in 0..p {
                    let z = self.panel.z(i, t, j);
                    x[j] = z;
                    if q > p {
                        x[p + j] = z * s.theta_tilde[i][(t, j)];
                    }
                }
                let ys = self.ystar(s, i, t);
                for a in 0..q {
                    lin[a] += w * x[a] * ys;
                    for b in 0..=a {
                        prec[(a, b)] += w * x[a] * x[b];
                    }
                }
            }
        }
        for a in 0..q {
            for b in 0..a {
                prec[(b, a)] = prec[(a, b)];
            }
        }
        GaussianPrecision::new(&prec, &lin).ok_or_else(|| SamplerError::SingularPosterior {
            group: g,
            rcond: rcond_symmetric(&prec),
        })
    }

    pub fn draw_base_and_scales<R: Rng + ?Sized>(
        &self,
        s: &mut ParameterState,
        rng: &mut R,
    ) -> Result<(), SamplerError> {
        self.check_variances(s)?;
        let key = rng.next_u64();
        let state = &*s;
        let draws = par::try_map_range(self.groups.len(), |g| {
            let post = self.base_and_scales_posterior(state, g)?;
            Ok(post.sample(&mut substream(key, g as u64)))
        })?;
        let p = self.p();
        for (g, d) in draws.into_iter().enumerate() {
            for &i in &self.groups[g] {
                for j in 0..p {
                    s.theta0[(i, j)] = d[j];
                    if d.len() > p {
                        s.omega_sqrt[(i, j)] = d[p + j];
                    }
                }
            }
        }
        Ok(())
    }

    // -- step 3 -------------------------------------------------------------

    /// Shape and rate of `sigma_g^2` given everything else.
    pub fn sigma_posterior(&self, s: &ParameterState, g: usize) -> (f64, f64) {
        let pr = &self.config.priors;
        let mut ssr = 0.0;
        for &i in &self.groups[g] {
            for t in 0..self.t_len() {
                ssr += (self.ystar(s, i, t) - self.fitted(s, i, t)).powi(2);
            }
        }
        let n_obs = (self.groups[g].len() * self.t_len()) as f64;
        (pr.c_sigma + 0.5 * n_obs, pr.d_sigma + 0.5 * ssr)
    }

    pub fn draw_sigma_sq<R: Rng + ?Sized>(&self, s: &mut ParameterState, rng: &mut R) {
        let key = rng.next_u64();
        let state = &*s;
        let draws = par::map_range(self.groups.len(), |g| {
            let (shape, rate) = self.sigma_posterior(state, g);
            sample_inv_gamma(shape, rate, &mut substream(key, g as u64))
        });
        for (g, v) in draws.into_iter().enumerate() {
            for &i in &self.groups[g] {
                s.sigma_sq[i] = v;
            }
        }
    }

    // -- step 4 -------------------------------------------------------------

    /// `log det(I - rho W_t) - 1/2 || eps_t - rho l_t ||^2` in standardized units, with
    /// `eps_it = (y_it - z_it' theta_it) / sigma_i` and `l_it = (W_t y_t)_i / sigma_i`;
    /// `-inf` when the determinant is not positive. Event index `t` is 0-based.
    pub fn log_likelihood_rho(&self, rho: f64, t: usize, s: &ParameterState) -> f64 {
        let ld = if self.logdet.is_empty() {
            Some(0.0)
        } else {
            self.logdet[self.weight_index[t]].eval(rho)
        };
        let Some(ld) = ld else {
            return f64::NEG_INFINITY;
        };
        let mut q = 0.0;
        for i in 0..self.panel.n_units() {
            let sd = s.sigma_sq[i].sqrt();
            let eps = (self.panel.responses[(i, t)] - self.fitted(s, i, t)) / sd;
            q += (eps - rho * self.lag[(i, t)] / sd).powi(2);
        }
        ld - 0.5 * q
    }

    pub fn quad_stats(&self, s: &ParameterState) -> QuadStats {
        let t_len = self.t_len();
        let mut st = QuadStats {
            a: vec![0.0; t_len],
            b: vec![0.0; t_len],
            c: vec![0.0; t_len],
        };
        for t in 0..t_len {
            for i in 0..self.panel.n_units() {
                let w = 1.0 / s.sigma_sq[i];
                let r = self.panel.responses[(i, t)] - self.fitted(s, i, t);
                let l = self.lag[(i, t)];
                st.a[t] += w * r * r;
                st.b[t] += w * r * l;
                st.c[t] += w * l * l;
            }
        }
        st
    }

    #[inline]
    fn kernel(&self, st: &QuadStats, t: usize, rho: f64) -> f64 {
        match self.logdet[self.weight_index[t]].eval(rho) {
            Some(ld) => ld - 0.5 * st.quad(t, rho),
            None => f64::NEG_INFINITY,
        }
    }

    /// Metropolis-Hastings pass over `rho`: a Gibbs draw of `rho_0` followed by one
    /// single-site update per event for a time-varying network, one random-walk update
    /// of the common value for a constant network, nothing without a network.
    pub fn draw_rho_path<R: Rng + ?Sized>(
        &self,
        s: &mut ParameterState,
        rng: &mut R,
    ) -> Result<RhoMove, SamplerError> {
        match self.config.network {
            NetworkMode::None => Ok(RhoMove::Skipped),
            NetworkMode::TimeVarying => self.draw_rho_time_varying(s, rng).map(RhoMove::Path),
            NetworkMode::Constant => self.draw_rho_constant(s, rng).map(RhoMove::Constant),
        }
    }

    fn draw_rho_time_varying<R: Rng + ?Sized>(
        &self,
        s: &mut ParameterState,
        rng: &mut R,
    ) -> Result<Vec<bool>, SamplerError> {
        let st = self.quad_stats(s);
        let prior = &self.config.priors;
        let t_len = self.t_len();
        let mut path: Vec<f64> = s.rho_path.iter().copied().collect();
        let m0 = rho_proposal(0, &path, s.varsigma_sq, prior)?;
        path[0] = m0.mean + m0.variance.sqrt() * standard_normal(rng);
        let mut accepted = vec![false; t_len];
        for t in 1..=t_len {
            let old = path[t];
            let old_ll = self.kernel(&st, t - 1, old);
            if old_ll == f64::NEG_INFINITY {
                return Err(SamplerError::InvalidState { t, rho: old });
            }
            let m = rho_proposal(t, &path, s.varsigma_sq, prior)?;
            let new = m.mean + m.variance.sqrt() * standard_normal(rng);
            let new_ll = self.kernel(&st, t - 1, new);
            let u: f64 = rng.random();
            if new_ll > f64::NEG_INFINITY && u.ln() < (new_ll - old_ll).min(0.0) {
                path[t] = new;
                accepted[t - 1] = true;
            }
        }
        s.rho_path = DVector::from_vec(path);
        Ok(accepted)
    }

    fn draw_rho_constant<R: Rng + ?Sized>(
        &self,
        s: &mut ParameterState,
        rng: &mut R,
    ) -> Result<bool, SamplerError> {
        let st = self.quad_stats(s);
        let prior = &self.config.priors;
        let t_len = self.t_len();
        let target = |rho: f64| -> f64 {
            let mut ll = -0.5 * (rho - prior.mu0).powi(2) / prior.varsigma0_sq;
            for t in 0..t_len {
                ll += self.kernel(&st, t, rho);
            }
            ll
        };
        let old = s.rho_path[1];
        let old_ll = target(old);
        if old_ll == f64::NEG_INFINITY {
            return Err(SamplerError::InvalidState { t: 1, rho: old });
        }
        let precision: f64 = st.c.iter().sum::<f64>() + 1.0 / prior.varsigma0_sq;
        let new = old + CONSTANT_RHO_STEP / precision.sqrt() * standard_normal(rng);
        let new_ll = target(new);
        let u: f64 = rng.random();
        let accept = new_ll > f64::NEG_INFINITY && u.ln() < (new_ll - old_ll).min(0.0);
        if accept {
            s.rho_path.fill(new);
        }
        Ok(accept)
    }

    // -- step 5 -------------------------------------------------------------

    pub fn draw_varsigma_sq<R: Rng + ?Sized>(&self, s: &mut ParameterState, rng: &mut R) {
        let (shape, rate) = varsigma_posterior(s.rho_path.as_slice(), &self.config.priors);
        s.varsigma_sq = sample_inv_gamma(shape, rate, rng);
    }

    /// One full sweep, steps 1-5 in order.
    pub fn sweep<R: Rng + ?Sized>(
        &self,
        s: &mut ParameterState,
        rng: &mut R,
    ) -> Result<RhoMove, SamplerError> {
        self.draw_tvp_paths(s, rng)?;
        self.draw_base_and_scales(s, rng)?;
        self.draw_sigma_sq(s, rng);
        let mv = self.draw_rho_path(s, rng)?;
        self.draw_varsigma_sq(s, rng);
        Ok(mv)
    }

    /// Full-data Gaussian log-likelihood of the structural model at `s`.
    pub fn log_likelihood(&self, s: &ParameterState) -> f64 {
        let st = self.quad_stats(s);
        let mut ll = 0.0;
        for t in 0..self.t_len() {
            ll += if self.logdet.is_empty() {
                -0.5 * st.quad(t, 0.0)
            } else {
                self.kernel(&st, t, s.rho_at(t))
            };
        }
        let log_var: f64 = s
            .sigma_sq
            .iter()
            .map(|v| (2.0 * std::f64::consts::PI * v).ln())
            .sum();
        ll - 0.5 * self.t_len() as f64 * log_var
    }
}

/// Least squares of `y` on `z` stacked over the group's units and all events.
fn group_ols(panel: &PanelData, units: &[usize]) -> OlsFit {
    let (t_len, p) = (panel.n_periods(), panel.n_coefs());
    let rows = units.len() * t_len;
    let mut x = DMatrix::zeros(rows, p);
    let mut y = DVector::zeros(rows);
    for (k, &i) in units.iter().enumerate() {
        for t in 0..t_len {
            let r = k * t_len + t;
            y[r] = panel.responses[(i, t)];
            for j in 0..p {
                x[(r, j)] = panel.z(i, t, j);
            }
        }
    }
    ols(&x, &y)
}

#[cfg(test)]
mod tests;
