//! Domain types shared by every stage of the pipeline, the model-variant
//! configuration, and input validation.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Tolerance on `sum_j w_ij = 1`.
pub const ROW_SUM_TOL: f64 = 1e-10;

/// Every violated invariant found while checking inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub issues: Vec<String>,
}

impl ValidationError {
    pub fn single(msg: impl Into<String>) -> Self {
        Self {
            issues: vec![msg.into()],
        }
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.issues.iter().any(|s| s.contains(needle))
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid inputs: {}", self.issues.join("; "))
    }
}

impl std::error::Error for ValidationError {}

/// Formats a number compactly for diagnostics (at most 10 decimals, trailing zeros trimmed).
pub(crate) fn fmt_num(x: f64) -> String {
    let s = format!("{x:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// Balanced panel of `N` unit responses over `T` events with `K` exogenous covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    /// `N x T` responses `y_it`.
    pub responses: DMatrix<f64>,
    /// `K` matrices of shape `N x T`; entry `k` holds covariate `x_{it,k+1}`.
    pub covariates: Vec<DMatrix<f64>>,
    pub unit_ids: Vec<String>,
    pub event_dates: Vec<NaiveDate>,
    /// The first covariate is a common shock, identical across units at each event.
    pub common_shock: bool,
}

impl PanelData {
    pub fn n_units(&self) -> usize {
        self.responses.nrows()
    }

    pub fn n_periods(&self) -> usize {
        self.responses.ncols()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }

    /// Length of the coefficient vector `theta = (alpha, beta')'`.
    pub fn n_coefs(&self) -> usize {
        self.covariates.len() + 1
    }

    /// Regressor `z_it[j]`: `1` for the intercept, `x_it[j-1]` otherwise.
    #[inline]
    pub fn z(&self, i: usize, t: usize, j: usize) -> f64 {
        if j == 0 {
            1.0
        } else {
            self.covariates[j - 1][(i, t)]
        }
    }

    pub fn z_vec(&self, i: usize, t: usize) -> DVector<f64> {
        DVector::from_fn(self.n_coefs(), |j, _| self.z(i, t, j))
    }

    fn check(&self, issues: &mut Vec<String>) {
        let (n, t) = self.responses.shape();
        if n < 1 {
            issues.push("N >= 1 required".into());
        }
        if t < 2 {
            issues.push(format!("T >= 2 required (got T = {t})"));
        }
        if self.covariates.is_empty() {
            issues.push("K >= 1 covariate required".into());
        }
        if self.unit_ids.len() != n {
            issues.push(format!(
                "{} unit ids for {n} response rows",
                self.unit_ids.len()
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for id in &self.unit_ids {
            if !seen.insert(id) {
                issues.push(format!("duplicate unit id {id}"));
            }
        }
        if self.event_dates.len() != t {
            issues.push(format!(
                "{} event dates for {t} response columns",
                self.event_dates.len()
            ));
        }
        for w in self.event_dates.windows(2) {
            if w[1] <= w[0] {
                issues.push(format!("event dates not strictly increasing at {}", w[1]));
            }
        }
        if let Some((i, j)) = first_non_finite(&self.responses) {
            issues.push(format!("non-finite response at unit {} event {}", i + 1, j + 1));
        }
        for (k, x) in self.covariates.iter().enumerate() {
            if x.shape() != (n, t) {
                issues.push(format!(
                    "covariate x{} has shape {:?}, expected ({n}, {t})",
                    k + 1,
                    x.shape()
                ));
                continue;
            }
            if let Some((i, j)) = first_non_finite(x) {
                issues.push(format!(
                    "non-finite covariate x{} at unit {} event {}",
                    k + 1,
                    i + 1,
                    j + 1
                ));
            }
        }
        if self.common_shock {
            if let Some(x) = self.covariates.first().filter(|x| x.shape() == (n, t)) {
                for j in 0..t {
                    let v = x[(0, j)];
                    if (1..n).any(|i| x[(i, j)] != v) {
                        issues.push(format!(
                            "common shock x1 varies across units at event {}",
                            j + 1
                        ));
                    }
                }
            }
        }
    }
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}

/// One network matrix and the date from which it applies.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightEntry {
    pub effective_from: NaiveDate,
    pub matrix: DMatrix<f64>,
}

/// Dated sequence of row-stochastic `N x N` matrices, piecewise constant in time.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    pub entries: Vec<WeightEntry>,
    pub unit_ids: Vec<String>,
}

/// Effective date used for a matrix that applies from the beginning of the sample.
pub fn open_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(1, 1, 1).unwrap()
}

impl WeightSequence {
    pub fn constant(unit_ids: Vec<String>, matrix: DMatrix<f64>) -> Self {
        Self {
            entries: vec![WeightEntry {
                effective_from: open_start(),
                matrix,
            }],
            unit_ids,
        }
    }

    pub fn n_units(&self) -> usize {
        self.unit_ids.len()
    }

    /// Index of the latest entry with `effective_from <= date`.
    pub fn lookup(&self, date: NaiveDate) -> Option<usize> {
        let after = self.entries.partition_point(|e| e.effective_from <= date);
        after.checked_sub(1)
    }

    pub fn matrix_at(&self, date: NaiveDate) -> Option<&DMatrix<f64>> {
        self.lookup(date).map(|i| &self.entries[i].matrix)
    }

    /// Rescales rows whose sums are within `load_tol` of one so that they sum to one
    /// exactly in floating point. Rows further off are left for [`Self::validate`] to report.
    pub fn renormalize_rows(&mut self, load_tol: f64) {
        for e in &mut self.entries {
            for i in 0..e.matrix.nrows() {
                let s: f64 = e.matrix.row(i).sum();
                if s > 0.0 && (s - 1.0).abs() <= load_tol {
                    e.matrix.row_mut(i).scale_mut(1.0 / s);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut issues = Vec::new();
        self.check(&mut issues);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ValidationError { issues })
        }
    }

    fn check(&self, issues: &mut Vec<String>) {
        let n = self.unit_ids.len();
        if self.entries.is_empty() {
            issues.push("weight sequence is empty".into());
        }
        for w in self.entries.windows(2) {
            if w[1].effective_from <= w[0].effective_from {
                issues.push(format!(
                    "weight effective dates not strictly increasing at {}",
                    w[1].effective_from
                ));
            }
        }
        for e in &self.entries {
            let tag = if e.effective_from == open_start() {
                "W".to_string()
            } else {
                format!("W effective {}", e.effective_from)
            };
            if e.matrix.shape() != (n, n) {
                issues.push(format!(
                    "{tag} has shape {:?}, expected ({n}, {n})",
                    e.matrix.shape()
                ));
                continue;
            }
            for i in 0..n {
                let row = e.matrix.row(i);
                if let Some(j) = row.iter().position(|v| !v.is_finite() || *v < 0.0) {
                    issues.push(format!(
                        "{tag}: entry ({}, {}) = {} is not a finite non-negative weight",
                        i + 1,
                        j + 1,
                        row[j]
                    ));
                    continue;
                }
                let s: f64 = row.sum();
                if (s - 1.0).abs() > ROW_SUM_TOL {
                    issues.push(format!("{tag}: row {} sums to {}", i + 1, fmt_num(s)));
                }
            }
        }
    }
}

/// Which coefficients vary across units and/or over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heterogeneity {
    /// One coefficient vector and one variance shared by all units, constant over time.
    Pooled,
    /// Unit-specific coefficients and variances, constant over time.
    CrossSection,
    /// Coefficients shared across units but following random walks over time.
    Time,
    /// Unit-specific random-walk coefficients.
    Both,
}

impl Heterogeneity {
    pub fn pools_units(self) -> bool {
        matches!(self, Heterogeneity::Pooled | Heterogeneity::Time)
    }

    pub fn time_varying(self) -> bool {
        matches!(self, Heterogeneity::Time | Heterogeneity::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkMode {
    None,
    Constant,
    TimeVarying,
}

/// Aggregate index (one series) or unit-level panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataShape {
    Aggregate,
    Industries,
}

macro_rules! str_enum {
    ($ty:ty, $what:literal, { $($name:literal => $val:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($val),)+
                    other => Err(format!(
                        concat!("unknown ", $what, " '{}' (expected one of: {})"),
                        other,
                        [$($name),+].join(", ")
                    )),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = match self { $(v if *v == $val => $name,)+ _ => unreachable!() };
                f.write_str(s)
            }
        }
    };
}

str_enum!(Heterogeneity, "heterogeneity", {
    "pooled" => Heterogeneity::Pooled,
    "cross_section" => Heterogeneity::CrossSection,
    "time" => Heterogeneity::Time,
    "both" => Heterogeneity::Both,
});

str_enum!(NetworkMode, "network mode", {
    "none" => NetworkMode::None,
    "constant" => NetworkMode::Constant,
    "time_varying" => NetworkMode::TimeVarying,
});

str_enum!(DataShape, "data shape", {
    "aggregate" => DataShape::Aggregate,
    "industries" => DataShape::Industries,
});

/// The eleven model specifications, listed in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    A1,
    A2,
    B1,
    B2,
    B3,
    B4,
    C1,
    C2,
    C3,
    C4,
    C5,
}

impl Variant {
    pub const ALL: [Variant; 11] = [
        Variant::A1,
        Variant::A2,
        Variant::B1,
        Variant::B2,
        Variant::B3,
        Variant::B4,
        Variant::C1,
        Variant::C2,
        Variant::C3,
        Variant::C4,
        Variant::C5,
    ];

    pub fn spec(self) -> (Heterogeneity, NetworkMode, DataShape) {
        use DataShape::*;
        use Heterogeneity::*;
        use NetworkMode as N;
        match self {
            Variant::A1 => (Pooled, N::None, Aggregate),
            Variant::A2 => (Time, N::None, Aggregate),
            Variant::B1 => (Pooled, N::None, Industries),
            Variant::B2 => (CrossSection, N::None, Industries),
            Variant::B3 => (Pooled, N::Constant, Industries),
            Variant::B4 => (CrossSection, N::Constant, Industries),
            Variant::C1 => (Pooled, N::TimeVarying, Industries),
            Variant::C2 => (CrossSection, N::TimeVarying, Industries),
            Variant::C3 => (Both, N::None, Industries),
            Variant::C4 => (Both, N::Constant, Industries),
            Variant::C5 => (Both, N::TimeVarying, Industries),
        }
    }

    pub fn from_spec(h: Heterogeneity, n: NetworkMode, d: DataShape) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.spec() == (h, n, d))
    }

    pub fn valid_names() -> String {
        Variant::ALL.map(|v| v.to_string()).join(", ")
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let up = s.trim().to_ascii_uppercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string() == up)
            .ok_or_else(|| {
                format!(
                    "unknown variant '{}' (valid variants: {})",
                    s.trim(),
                    Variant::valid_names()
                )
            })
    }
}

/// Prior hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// Scale of the g-prior on the initial coefficients, `theta_i0 ~ N(0, a V_i)`.
    pub a: f64,
    /// Scale of the prior on the signed innovation scales, `sqrt(omega_i) ~ N(0, b V_i)`.
    pub b: f64,
    /// Prior mean of `rho_0`.
    pub mu0: f64,
    /// Prior variance of `rho_0`.
    pub varsigma0_sq: f64,
    pub c_varsigma: f64,
    pub d_varsigma: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            a: 100.0,
            b: 0.1,
            mu0: 0.0,
            varsigma0_sq: 0.1,
            c_varsigma: 3.0,
            d_varsigma: 0.03,
            c_sigma: 0.01,
            d_sigma: 0.01,
        }
    }
}

impl PriorSpec {
    fn check(&self, issues: &mut Vec<String>) {
        let fields = [
            ("a", self.a),
            ("b", self.b),
            ("varsigma0_sq", self.varsigma0_sq),
            ("c_varsigma", self.c_varsigma),
            ("d_varsigma", self.d_varsigma),
            ("c_sigma", self.c_sigma),
            ("d_sigma", self.d_sigma),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                issues.push(format!("prior {name} must be positive and finite (got {v})"));
            }
        }
        if !self.mu0.is_finite() {
            issues.push("prior mu0 must be finite".into());
        }
    }
}

/// Burn-in, retained sweeps and thinning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSchedule {
    pub burn_in: usize,
    /// Sweeps run after burn-in; every `thin`-th one is stored.
    pub keep: usize,
    pub thin: usize,
}

impl Default for ChainSchedule {
    fn default() -> Self {
        Self {
            burn_in: 5000,
            keep: 10_000,
            thin: 2,
        }
    }
}

impl ChainSchedule {
    pub fn retained(&self) -> usize {
        self.keep / self.thin
    }

    pub fn total_sweeps(&self) -> usize {
        self.burn_in + self.keep
    }
}

/// Declarative choice of model variant, priors and chain schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub heterogeneity: Heterogeneity,
    pub network: NetworkMode,
    pub data_shape: DataShape,
    pub priors: PriorSpec,
    pub chain: ChainSchedule,
    pub rng_seed: u64,
    /// Covariate (1-based, excluding the intercept) whose impacts are reported.
    pub effect_covariate: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::for_variant(Variant::C5)
    }
}

impl ModelConfig {
    pub fn for_variant(v: Variant) -> Self {
        let (heterogeneity, network, data_shape) = v.spec();
        Self {
            heterogeneity,
            network,
            data_shape,
            priors: PriorSpec::default(),
            chain: ChainSchedule::default(),
            rng_seed: 0,
            effect_covariate: 1,
        }
    }

    pub fn variant(&self) -> Option<Variant> {
        Variant::from_spec(self.heterogeneity, self.network, self.data_shape)
    }

    pub fn with_chain(mut self, burn_in: usize, keep: usize, thin: usize) -> Self {
        self.chain = ChainSchedule {
            burn_in,
            keep,
            thin,
        };
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    fn check(&self, issues: &mut Vec<String>) {
        self.priors.check(issues);
        if self.chain.thin == 0 {
            issues.push("thin must be >= 1".into());
        } else if self.chain.keep < self.chain.thin {
            issues.push("keep must be >= thin so that at least one draw is retained".into());
        }
    }
}

/// One state of the Markov chain. Pooled variants store identical values for every unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterState {
    /// Per unit, a `T x (K+1)` matrix of non-centered paths `theta_tilde_it`.
    pub theta_tilde: Vec<DMatrix<f64>>,
    /// `N x (K+1)` initial coefficients `theta_i0 = (alpha_i0, beta_i0')`.
    pub theta0: DMatrix<f64>,
    /// `N x (K+1)` signed innovation scales `sqrt(omega_ij)`.
    pub omega_sqrt: DMatrix<f64>,
    pub sigma_sq: DVector<f64>,
    /// `rho_0 .. rho_T`.
    pub rho_path: DVector<f64>,
    pub varsigma_sq: f64,
}

impl ParameterState {
    pub fn zeros(n: usize, t: usize, p: usize) -> Self {
        Self {
            theta_tilde: vec![DMatrix::zeros(t, p); n],
            theta0: DMatrix::zeros(n, p),
            omega_sqrt: DMatrix::zeros(n, p),
            sigma_sq: DVector::from_element(n, 1.0),
            rho_path: DVector::zeros(t + 1),
            varsigma_sq: 1.0,
        }
    }

    pub fn n_units(&self) -> usize {
        self.theta0.nrows()
    }

    pub fn n_periods(&self) -> usize {
        self.rho_path.len() - 1
    }

    pub fn n_coefs(&self) -> usize {
        self.theta0.ncols()
    }

    /// Composed coefficient `theta_it[j] = theta_i0[j] + sqrt(omega_ij) * theta_tilde_it[j]`,
    /// for event index `t` in `0..T`.
    #[inline]
    pub fn theta(&self, i: usize, t: usize, j: usize) -> f64 {
        self.theta0[(i, j)] + self.omega_sqrt[(i, j)] * self.theta_tilde[i][(t, j)]
    }

    /// `rho` at event index `t` in `0..T` (i.e. `rho_{t+1}` in 1-based time).
    #[inline]
    pub fn rho_at(&self, t: usize) -> f64 {
        self.rho_path[t + 1]
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut issues = Vec::new();
        let (n, p) = self.theta0.shape();
        let t = self.n_periods();
        if self.omega_sqrt.shape() != (n, p) {
            issues.push("omega_sqrt shape differs from theta0".into());
        }
        if self.theta_tilde.len() != n || self.theta_tilde.iter().any(|m| m.shape() != (t, p)) {
            issues.push("theta_tilde shape mismatch".into());
        }
        if self.sigma_sq.len() != n || self.sigma_sq.iter().any(|&s| !(s > 0.0)) {
            issues.push("sigma_sq must hold N positive values".into());
        }
        if !(self.varsigma_sq > 0.0) {
            issues.push("varsigma_sq must be positive".into());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ValidationError { issues })
        }
    }
}

/// Sampler diagnostics collected over the retained part of a chain.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepDiagnostics {
    /// Metropolis-Hastings acceptance rate for `rho_1 .. rho_T` after burn-in. A single
    /// entry for the constant-network sampler, empty without a network.
    pub rho_accept_rate: Vec<f64>,
    /// Full-data log-likelihood at each retained draw.
    pub loglik_trace: Vec<f64>,
}

/// Retained draws of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub draws: Vec<ParameterState>,
    pub config: ModelConfig,
    pub diagnostics: SweepDiagnostics,
}

/// Inputs that passed [`validate_inputs`], with the weight matrix in force at each event.
#[derive(Debug, Clone)]
pub struct Validated<'a> {
    pub panel: &'a PanelData,
    pub weights: Option<&'a WeightSequence>,
    pub config: &'a ModelConfig,
    weight_index: Vec<usize>,
}

impl<'a> Validated<'a> {
    /// Index into `weights.entries` of the matrix in force at event `t`.
    pub fn weight_index(&self, t: usize) -> usize {
        self.weight_index[t]
    }

    pub fn weight_schedule(&self) -> &[usize] {
        &self.weight_index
    }

    pub fn weight_at(&self, t: usize) -> Option<&'a DMatrix<f64>> {
        self.weights.map(|w| &w.entries[self.weight_index[t]].matrix)
    }
}

/// Checks every invariant of the panel, the weights and the configuration, and resolves
/// the weight matrix for each event. Returns all violations at once.
pub fn validate_inputs<'a>(
    panel: &'a PanelData,
    weights: Option<&'a WeightSequence>,
    config: &'a ModelConfig,
) -> Result<Validated<'a>, ValidationError> {
    let mut issues = Vec::new();
    panel.check(&mut issues);
    config.check(&mut issues);

    let n = panel.n_units();
    if config.data_shape == DataShape::Aggregate && n != 1 {
        issues.push(format!("aggregate data requires N = 1 (got N = {n})"));
    }
    if config.effect_covariate == 0 || config.effect_covariate > panel.n_covariates() {
        issues.push(format!(
            "effect covariate {} outside 1..={}",
            config.effect_covariate,
            panel.n_covariates()
        ));
    }

    let mut index = vec![0; panel.n_periods()];
    match weights {
        Some(w) => {
            w.check(&mut issues);
            if w.n_units() != n {
                issues.push(format!(
                    "dimension mismatch: panel has N = {n}, weights have N = {}",
                    w.n_units()
                ));
            } else if w.unit_ids != panel.unit_ids {
                issues.push("weight matrix unit ordering differs from the panel".into());
            }
            for (t, d) in panel.event_dates.iter().enumerate() {
                match w.lookup(*d) {
                    Some(k) => index[t] = k,
                    None => {
                        issues.push(format!("no weight matrix in force at event date {d}"));
                        break;
                    }
                }
            }
        }
        None if config.network != NetworkMode::None => {
            issues.push(format!("network mode {} requires weights", config.network));
        }
        None => {}
    }

    if issues.is_empty() {
        Ok(Validated {
            panel,
            weights,
            config,
            weight_index: index,
        })
    } else {
        Err(ValidationError { issues })
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn valid_bundle() {
        let panel = small_panel(3, 4);
        let w = WeightSequence::constant(panel.unit_ids.clone(), ring(3));
        let cfg = ModelConfig::default();
        let v = validate_inputs(&panel, Some(&w), &cfg).unwrap();
        assert_eq!(v.weight_schedule(), &[0, 0, 0, 0]);
    }

    #[test]
    fn row_sum_violation_is_reported() {
        let panel = small_panel(3, 4);
        let mut m = ring(3);
        m[(1, 0)] = 0.4; // row 2 now sums to 0.9
        let w = WeightSequence::constant(panel.unit_ids.clone(), m);
        let err = validate_inputs(&panel, Some(&w), &ModelConfig::default()).unwrap_err();
        assert!(err.mentions("row 2 sums to 0.9"), "{err}");
    }

    #[test]
    fn single_period_rejected() {
        let panel = small_panel(3, 1);
        let cfg = ModelConfig::for_variant(Variant::B1);
        let err = validate_inputs(&panel, None, &cfg).unwrap_err();
        assert!(err.mentions("T >= 2 required"), "{err}");
    }

    #[test]
    fn collects_every_violation() {
        let mut panel = small_panel(3, 4);
        panel.responses[(0, 0)] = f64::NAN;
        panel.event_dates.swap(1, 2);
        let w = WeightSequence::constant(vec!["a".into(), "b".into()], ring(2));
        let err = validate_inputs(&panel, Some(&w), &ModelConfig::default()).unwrap_err();
        assert!(err.mentions("non-finite response"));
        assert!(err.mentions("not strictly increasing"));
        assert!(err.mentions("dimension mismatch"));
    }

    #[test]
    fn network_requires_weights() {
        let panel = small_panel(3, 4);
        let err = validate_inputs(&panel, None, &ModelConfig::default()).unwrap_err();
        assert!(err.mentions("requires weights"));
    }

    #[test]
    fn lookup_is_right_continuous() {
        let d = dates(6);
        let ids: Vec<String> = (0..2).map(|i| i.to_string()).collect();
        let seq = WeightSequence {
            entries: vec![
                WeightEntry {
                    effective_from: open_start(),
                    matrix: ring(2),
                },
                WeightEntry {
                    effective_from: d[3],
                    matrix: DMatrix::identity(2, 2),
                },
            ],
            unit_ids: ids,
        };
        let idx: Vec<usize> = d.iter().map(|x| seq.lookup(*x).unwrap()).collect();
        assert_eq!(idx, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(seq.lookup(d[3] - chrono::Duration::days(1)), Some(0));
    }

    #[test]
    fn variant_table_is_injective() {
        let specs: std::collections::HashSet<_> = Variant::ALL.iter().map(|v| v.spec()).collect();
        assert_eq!(specs.len(), 11);
        for v in Variant::ALL {
            let (h, n, d) = v.spec();
            assert_eq!(Variant::from_spec(h, n, d), Some(v));
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        let err = "Z9".parse::<Variant>().unwrap_err();
        assert!(err.contains("A1, A2, B1"));
    }

    #[test]
    fn default_priors() {
        let p = PriorSpec::default();
        assert_eq!(
            (p.a, p.b, p.mu0, p.varsigma0_sq, p.c_varsigma, p.d_varsigma, p.c_sigma, p.d_sigma),
            (100.0, 0.1, 0.0, 0.1, 3.0, 0.03, 0.01, 0.01)
        );
        assert_eq!(ChainSchedule::default().retained(), 5000);
    }

    #[test]
    fn composition_reduces_to_base_when_paths_vanish() {
        let mut s = ParameterState::zeros(2, 5, 2);
        s.theta0 = DMatrix::from_row_slice(2, 2, &[0.1, -2.0, 0.3, -1.0]);
        s.omega_sqrt = DMatrix::from_element(2, 2, 0.7);
        for t in 0..5 {
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(s.theta(i, t, j), s.theta0[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn renormalize_fixes_drift_only() {
        let mut m = ring(3);
        m[(0, 1)] += 1e-9;
        m[(2, 0)] = 0.4;
        let mut w = WeightSequence::constant((0..3).map(|i| i.to_string()).collect(), m);
        w.renormalize_rows(1e-6);
        let err = w.validate().unwrap_err();
        assert_eq!(err.issues.len(), 1);
        assert!(err.mentions("row 3 sums to 0.9"));
    }
}
