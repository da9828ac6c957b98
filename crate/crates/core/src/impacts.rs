//! Direct, indirect and total effects of a covariate through the network multiplier.
//!
//! For event `t` and covariate `k`, `S = (I - rho_t W_t)^{-1} diag(beta_1kt .. beta_Nkt)`.
//! Direct effects are the diagonal of `S`, total effects its row sums, indirect effects
//! the difference, and the network share is `100 * indirect / total`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{PanelData, ParameterState, PosteriorDraws, WeightSequence};
use crate::par;
use crate::stats::{self, Band};

/// Totals smaller than this in magnitude leave the share undefined.
pub const SHARE_EPS: f64 = 1e-10;
/// Mass of the reported credible bands (0.5% / 99.5% quantiles).
pub const BAND_MASS: f64 = 0.99;

#[derive(Debug, Error)]
pub enum ImpactError {
    #[error("I - rho W is singular at rho = {rho}")]
    Singular { rho: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no posterior draws")]
    NoDraws,
    #[error("covariate {k} outside 1..={max}")]
    Covariate { k: usize, max: usize },
    #[error("no weight matrix in force at event {0}")]
    MissingWeights(usize),
}

/// `S = d y_t / d x_kt'`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactMatrix {
    pub s: DMatrix<f64>,
}

/// Solves `(I - rho W) S = diag(betas)` by LU without forming the inverse.
pub fn impact_matrix(
    rho: f64,
    w: &DMatrix<f64>,
    betas: &DVector<f64>,
) -> Result<ImpactMatrix, ImpactError> {
    let n = betas.len();
    if w.shape() != (n, n) {
        return Err(ImpactError::Dimension(format!(
            "W is {:?}, betas have length {n}",
            w.shape()
        )));
    }
    let m = DMatrix::<f64>::identity(n, n) - w * rho;
    let s = m
        .lu()
        .solve(&DMatrix::from_diagonal(betas))
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or(ImpactError::Singular { rho })?;
    Ok(ImpactMatrix { s })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectSummary {
    pub direct: DVector<f64>,
    pub indirect: DVector<f64>,
    pub total: DVector<f64>,
    /// Per-unit `100 * indirect / total`; `None` when `|total| < SHARE_EPS`.
    pub share: Vec<Option<f64>>,
    pub avg_direct: f64,
    pub avg_indirect: f64,
    pub avg_total: f64,
    pub network_share_pct: Option<f64>,
}

pub fn share_pct(indirect: f64, total: f64) -> Option<f64> {
    (total.abs() >= SHARE_EPS).then(|| 100.0 * indirect / total)
}

pub fn effect_summary(s: &ImpactMatrix) -> EffectSummary {
    let s = &s.s;
    let n = s.nrows() as f64;
    let direct = s.diagonal();
    let total = DVector::from_iterator(s.nrows(), s.row_iter().map(|r| r.sum()));
    let indirect = &total - &direct;
    let share = indirect
        .iter()
        .zip(total.iter())
        .map(|(i, t)| share_pct(*i, *t))
        .collect();
    let avg_direct = direct.sum() / n;
    let avg_indirect = indirect.sum() / n;
    let avg_total = total.sum() / n;
    EffectSummary {
        network_share_pct: share_pct(avg_indirect, avg_total),
        direct,
        indirect,
        total,
        share,
        avg_direct,
        avg_indirect,
        avg_total,
    }
}

/// Per-draw effects, time-averaged with equal weights over events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawEffects {
    pub avg_direct: f64,
    pub avg_indirect: f64,
    pub avg_total: f64,
    /// Ratio of the time-averaged indirect to total effect, in percent.
    pub share: Option<f64>,
}

/// Posterior median surface per unit and event (heatmap input).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub t: usize,
    pub unit: usize,
    pub direct: f64,
    pub indirect: f64,
    pub total: f64,
    pub share: Option<f64>,
}

/// Time-averaged `(total, share)` of one unit in one draw; clustering input.
pub type EffectPair = (f64, Option<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactReport {
    /// Covariate (1-based, excluding the intercept).
    pub k: usize,
    pub direct: Band,
    pub indirect: Band,
    pub total: Band,
    /// `None` when every draw has an undefined share.
    pub share: Option<Band>,
    pub per_draw: Vec<DrawEffects>,
    /// `[draw][unit]`.
    pub effect_pairs: Vec<Vec<EffectPair>>,
    pub heatmap: Vec<HeatCell>,
}

/// Weight matrix in force at each event, or `None` entries without weights.
fn weights_per_event<'w>(
    panel: &PanelData,
    weights: Option<&'w WeightSequence>,
) -> Result<Vec<Option<&'w DMatrix<f64>>>, ImpactError> {
    panel
        .event_dates
        .iter()
        .enumerate()
        .map(|(t, d)| match weights {
            None => Ok(None),
            Some(w) => w
                .matrix_at(*d)
                .map(Some)
                .ok_or(ImpactError::MissingWeights(t)),
        })
        .collect()
}

fn draw_impact(
    s: &ParameterState,
    t: usize,
    k: usize,
    w: Option<&DMatrix<f64>>,
) -> Result<ImpactMatrix, ImpactError> {
    let n = s.n_units();
    let betas = DVector::from_fn(n, |i, _| s.theta(i, t, k));
    match w {
        Some(w) => impact_matrix(s.rho_at(t), w, &betas),
        None => impact_matrix(0.0, &DMatrix::zeros(n, n), &betas),
    }
}

/// Effect summaries of one draw at every event.
pub fn draw_effects_by_event(
    s: &ParameterState,
    panel: &PanelData,
    weights: Option<&WeightSequence>,
    k: usize,
) -> Result<Vec<EffectSummary>, ImpactError> {
    let ws = weights_per_event(panel, weights)?;
    (0..panel.n_periods())
        .map(|t| draw_impact(s, t, k, ws[t]).map(|m| effect_summary(&m)))
        .collect()
}

fn check_k(panel: &PanelData, k: usize) -> Result<(), ImpactError> {
    if k == 0 || k > panel.n_covariates() {
        return Err(ImpactError::Covariate {
            k,
            max: panel.n_covariates(),
        });
    }
    Ok(())
}

/// Posterior summaries of the effects of covariate `k` (1-based): medians with 99% bands
/// of the time- and unit-averaged effects, per-unit time-averaged `(total, share)` pairs
/// per draw, and median surfaces per unit and event.
pub fn aggregate_draws(
    draws: &PosteriorDraws,
    panel: &PanelData,
    weights: Option<&WeightSequence>,
    k: usize,
) -> Result<ImpactReport, ImpactError> {
    check_k(panel, k)?;
    if draws.draws.is_empty() {
        return Err(ImpactError::NoDraws);
    }
    let (n, t_len) = (panel.n_units(), panel.n_periods());
    let ws = weights_per_event(panel, weights)?;
    let tf = t_len as f64;

    let per = par::try_map_range(draws.draws.len(), |d| {
        let s = &draws.draws[d];
        let mut avg = [0.0; 3];
        let mut unit_ind = vec![0.0; n];
        let mut unit_tot = vec![0.0; n];
        for t in 0..t_len {
            let e = effect_summary(&draw_impact(s, t, k, ws[t])?);
            avg[0] += e.avg_direct / tf;
            avg[1] += e.avg_indirect / tf;
            avg[2] += e.avg_total / tf;
            for i in 0..n {
                unit_ind[i] += e.indirect[i] / tf;
                unit_tot[i] += e.total[i] / tf;
            }
        }
        let pairs: Vec<EffectPair> = (0..n)
            .map(|i| (unit_tot[i], share_pct(unit_ind[i], unit_tot[i])))
            .collect();
        let eff = DrawEffects {
            avg_direct: avg[0],
            avg_indirect: avg[1],
            avg_total: avg[2],
            share: share_pct(avg[1], avg[2]),
        };
        Ok::<_, ImpactError>((eff, pairs))
    })?;
    let (per_draw, effect_pairs): (Vec<_>, Vec<_>) = per.into_iter().unzip();

    let heat = par::try_map_range(t_len, |t| {
        let sums = draws
            .draws
            .iter()
            .map(|s| draw_impact(s, t, k, ws[t]).map(|m| effect_summary(&m)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok::<_, ImpactError>(
            (0..n)
                .map(|i| {
                    let col = |f: &dyn Fn(&EffectSummary) -> f64| {
                        stats::quantile(&sums.iter().map(f).collect::<Vec<_>>(), 0.5)
                    };
                    let shares: Vec<f64> = sums.iter().filter_map(|e| e.share[i]).collect();
                    HeatCell {
                        t,
                        unit: i,
                        direct: col(&|e| e.direct[i]),
                        indirect: col(&|e| e.indirect[i]),
                        total: col(&|e| e.total[i]),
                        share: (!shares.is_empty()).then(|| stats::quantile(&shares, 0.5)),
                    }
                })
                .collect::<Vec<_>>(),
        )
    })?;

    let band = |f: &dyn Fn(&DrawEffects) -> f64| {
        Band::from_sample(&per_draw.iter().map(f).collect::<Vec<_>>(), BAND_MASS)
    };
    let shares: Vec<f64> = per_draw.iter().filter_map(|e| e.share).collect();
    Ok(ImpactReport {
        k,
        direct: band(&|e| e.avg_direct),
        indirect: band(&|e| e.avg_indirect),
        total: band(&|e| e.avg_total),
        share: (!shares.is_empty()).then(|| Band::from_sample(&shares, BAND_MASS)),
        heatmap: heat.into_iter().flatten().collect(),
        per_draw,
        effect_pairs,
    })
}

/// Medians and 99% bands of the unit- and time-averaged intercept and coefficient `k`,
/// the unit-averaged error variance and (with a network) the time-averaged `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBands {
    pub alpha: Band,
    pub beta: Band,
    pub sigma_sq: Band,
    pub rho: Option<Band>,
}

pub fn parameter_bands(draws: &PosteriorDraws, k: usize, networked: bool) -> ParameterBands {
    let avg = |s: &ParameterState, j: usize| {
        let (n, t) = (s.n_units(), s.n_periods());
        let mut acc = 0.0;
        for i in 0..n {
            for tt in 0..t {
                acc += s.theta(i, tt, j);
            }
        }
        acc / (n * t) as f64
    };
    let collect = |f: &dyn Fn(&ParameterState) -> f64| {
        Band::from_sample(&draws.draws.iter().map(f).collect::<Vec<_>>(), BAND_MASS)
    };
    ParameterBands {
        alpha: collect(&|s| avg(s, 0)),
        beta: collect(&|s| avg(s, k)),
        sigma_sq: collect(&|s| s.sigma_sq.mean()),
        rho: networked.then(|| {
            collect(&|s| s.rho_path.rows(1, s.n_periods()).mean())
        }),
    }
}
