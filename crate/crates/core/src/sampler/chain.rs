use log::{info, warn};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{RhoMove, Sampler, SamplerError};
use crate::data_model::{
    validate_inputs, ModelConfig, PanelData, PosteriorDraws, SweepDiagnostics, Validated,
    WeightSequence,
};
use crate::linalg::substream;
use crate::par;

/// Acceptance rates outside this range are logged as a warning.
const ACCEPT_WARN: (f64, f64) = (0.1, 0.9);

/// Validates the inputs and runs one chain.
pub fn run_mcmc(
    panel: &PanelData,
    weights: Option<&WeightSequence>,
    config: &ModelConfig,
) -> crate::Result<PosteriorDraws> {
    let v = validate_inputs(panel, weights, config)?;
    Ok(run_validated(&v)?)
}

/// Burn-in, then `keep` sweeps of which every `thin`-th is stored. Deterministic given
/// `config.rng_seed`.
pub fn run_validated(v: &Validated<'_>) -> Result<PosteriorDraws, SamplerError> {
    let cfg = v.config;
    let sampler = Sampler::new(v);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut state = sampler.initial_state();
    let sched = cfg.chain;
    let mut draws = Vec::with_capacity(sched.retained());
    let mut loglik = Vec::with_capacity(sched.retained());
    let mut accepts: Vec<usize> = Vec::new();

    for sweep in 0..sched.total_sweeps() {
        let mv = sampler.sweep(&mut state, &mut rng)?;
        if sweep < sched.burn_in {
            continue;
        }
        let flags = match mv {
            RhoMove::Skipped => Vec::new(),
            RhoMove::Constant(a) => vec![a],
            RhoMove::Path(p) => p,
        };
        if accepts.is_empty() {
            accepts = vec![0; flags.len()];
        }
        for (c, f) in accepts.iter_mut().zip(&flags) {
            *c += usize::from(*f);
        }
        if (sweep - sched.burn_in + 1) % sched.thin == 0 {
            loglik.push(sampler.log_likelihood(&state));
            draws.push(state.clone());
        }
    }

    let rates: Vec<f64> = accepts
        .iter()
        .map(|&c| c as f64 / sched.keep.max(1) as f64)
        .collect();
    let outside = rates
        .iter()
        .filter(|r| **r < ACCEPT_WARN.0 || **r > ACCEPT_WARN.1)
        .count();
    if outside > 0 {
        warn!(
            "{outside} of {} rho acceptance rates outside [{}, {}]",
            rates.len(),
            ACCEPT_WARN.0,
            ACCEPT_WARN.1
        );
    }
    info!(
        "chain finished: {} draws retained (seed {})",
        draws.len(),
        cfg.rng_seed
    );
    Ok(PosteriorDraws {
        draws,
        config: cfg.clone(),
        diagnostics: SweepDiagnostics {
            rho_accept_rate: rates,
            loglik_trace: loglik,
        },
    })
}

/// Seed of chain `c`: the configured seed for the first chain, an independent
/// substream-derived value for the others.
pub fn chain_seed(seed: u64, c: usize) -> u64 {
    if c == 0 {
        seed
    } else {
        substream(seed, c as u64).next_u64()
    }
}

/// Runs `chains` independent chains concurrently.
pub fn run_chains(
    panel: &PanelData,
    weights: Option<&WeightSequence>,
    config: &ModelConfig,
    chains: usize,
) -> crate::Result<Vec<PosteriorDraws>> {
    validate_inputs(panel, weights, config)?;
    let out = par::try_map_range(chains, |c| {
        let cfg = config.clone().with_seed(chain_seed(config.rng_seed, c));
        run_mcmc(panel, weights, &cfg)
    })?;
    Ok(out)
}
