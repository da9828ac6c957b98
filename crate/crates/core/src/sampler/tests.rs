use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data_model::fixtures::{dates, ring, small_panel};
use crate::data_model::{validate_inputs, ModelConfig, PanelData, Variant, WeightSequence};
use crate::linalg::inv_gamma_mean;
use crate::synth::{simulate, DgpSpec};

fn noisy_panel(n: usize, t: usize, rho: f64, sigma_sq: f64, seed: u64) -> (PanelData, WeightSequence) {
    let sim = simulate(&DgpSpec::constant(n, t, &[0.1, -2.0], rho, sigma_sq, seed)).unwrap();
    (sim.panel, sim.weights)
}

fn stacked(panel: &PanelData, units: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let (t_len, p) = (panel.n_periods(), panel.n_coefs());
    let x = DMatrix::from_fn(units.len() * t_len, p, |r, j| panel.z(units[r / t_len], r % t_len, j));
    let y = DVector::from_fn(units.len() * t_len, |r, _| panel.responses[(units[r / t_len], r % t_len)]);
    (x, y)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

#[test]
fn flat_prior_recovers_least_squares() {
    let (panel, _) = noisy_panel(4, 30, 0.0, 0.1, 3);
    let mut cfg = ModelConfig::for_variant(Variant::B1);
    cfg.priors.a = 1e8;
    let v = validate_inputs(&panel, None, &cfg).unwrap();
    let sm = Sampler::new(&v);
    let post = sm.base_and_scales_posterior(&sm.initial_state(), 0).unwrap();
    let (x, y) = stacked(&panel, &[0, 1, 2, 3]);
    let fit = ols(&x, &y);
    for j in 0..2 {
        assert!(rel(post.mean[j], fit.coef[j]) < 1e-3, "{} vs {}", post.mean[j], fit.coef[j]);
    }
}

#[test]
fn conjugate_block_matches_closed_form() {
    let panel = PanelData {
        responses: DMatrix::from_row_slice(1, 5, &[0.3, -0.1, 0.4, 0.0, -0.5]),
        covariates: vec![DMatrix::from_row_slice(1, 5, &[0.1, -0.2, 0.3, 0.05, -0.25])],
        unit_ids: vec!["u0".into()],
        event_dates: dates(5),
        common_shock: true,
    };
    let cfg = ModelConfig::for_variant(Variant::B1);
    let v = validate_inputs(&panel, None, &cfg).unwrap();
    let sm = Sampler::new(&v);
    let mut s = sm.initial_state();
    s.sigma_sq[0] = 0.3;
    let post = sm.base_and_scales_posterior(&s, 0).unwrap();

    let (x, y) = stacked(&panel, &[0]);
    let fit = ols(&x, &y);
    let a = cfg.priors.a;
    let prior = DMatrix::from_diagonal(&fit.coef_var.map(|v| 1.0 / (a * v)));
    let prec = x.transpose() * &x / 0.3 + prior;
    let cov = prec.clone().try_inverse().unwrap();
    let mean = &cov * x.transpose() * &y / 0.3;
    let got = post.covariance();
    for j in 0..2 {
        assert!(rel(post.mean[j], mean[j]) < 1e-12);
        for k in 0..2 {
            assert!((got[(j, k)] - cov[(j, k)]).abs() < 1e-12 * cov[(j, j)].abs());
        }
    }
}

#[test]
fn scales_follow_prior_when_paths_vanish() {
    let panel = small_panel(1, 12);
    let cfg = ModelConfig::for_variant(Variant::A2);
    let v = validate_inputs(&panel, None, &cfg).unwrap();
    let sm = Sampler::new(&v);
    let s = sm.initial_state();
    assert!(s.theta_tilde[0].iter().all(|x| *x == 0.0));
    let post = sm.base_and_scales_posterior(&s, 0).unwrap();
    let cov = post.covariance();
    let vg = sm.prior_variances(0);
    for j in 0..2 {
        assert!(post.mean[2 + j].abs() < 1e-12);
        let want = cfg.priors.b * vg[j];
        assert!(rel(cov[(2 + j, 2 + j)], want) < 1e-12);
        assert!(cov[(j, 2 + j)].abs() < 1e-12 * want);
    }
}

#[test]
fn sigma_rate_collapses_to_prior_without_residuals() {
    let (panel, _) = noisy_panel(3, 10, 0.0, 0.0, 5);
    for (variant, obs) in [(Variant::B1, 30.0), (Variant::B2, 10.0)] {
        let cfg = ModelConfig::for_variant(variant);
        let v = validate_inputs(&panel, None, &cfg).unwrap();
        let sm = Sampler::new(&v);
        let mut s = sm.initial_state();
        for i in 0..3 {
            s.theta0[(i, 0)] = 0.1;
            s.theta0[(i, 1)] = -2.0;
        }
        let (shape, rate) = sm.sigma_posterior(&s, 0);
        assert!((shape - (cfg.priors.c_sigma + obs / 2.0)).abs() < 1e-12);
        assert!((rate - cfg.priors.d_sigma).abs() < 1e-20);
    }
}

#[test]
fn pooled_groups_share_error_variance() {
    let (panel, _) = noisy_panel(4, 15, 0.0, 0.1, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (variant, shared) in [(Variant::B1, true), (Variant::B2, false)] {
        let cfg = ModelConfig::for_variant(variant);
        let v = validate_inputs(&panel, None, &cfg).unwrap();
        let sm = Sampler::new(&v);
        let mut s = sm.initial_state();
        sm.draw_sigma_sq(&mut s, &mut rng);
        let all_equal = s.sigma_sq.iter().all(|x| *x == s.sigma_sq[0]);
        assert_eq!(all_equal, shared);
    }
}

#[test]
fn rho_likelihood_at_zero_is_gaussian_quadratic() {
    let panel = small_panel(4, 6);
    let w = WeightSequence::constant(panel.unit_ids.clone(), ring(4));
    let cfg = ModelConfig::for_variant(Variant::C5);
    let v = validate_inputs(&panel, Some(&w), &cfg).unwrap();
    let sm = Sampler::new(&v);
    let s = sm.initial_state();
    for t in 0..6 {
        let mut q = 0.0;
        for i in 0..4 {
            let fit = s.theta(i, t, 0) + panel.z(i, t, 1) * s.theta(i, t, 1);
            q += (panel.responses[(i, t)] - fit).powi(2) / s.sigma_sq[i];
        }
        assert!((sm.log_likelihood_rho(0.0, t, &s) + 0.5 * q).abs() < 1e-12);
    }
}

#[test]
fn rho_likelihood_on_swap_network() {
    let panel = PanelData {
        responses: DMatrix::zeros(2, 3),
        covariates: vec![DMatrix::from_fn(2, 3, |i, t| (i + t) as f64 * 0.1)],
        unit_ids: vec!["a".into(), "b".into()],
        event_dates: dates(3),
        common_shock: false,
    };
    let w = WeightSequence::constant(
        panel.unit_ids.clone(),
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
    );
    let cfg = ModelConfig::for_variant(Variant::C2);
    let v = validate_inputs(&panel, Some(&w), &cfg).unwrap();
    let sm = Sampler::new(&v);
    let mut s = sm.initial_state();
    s.theta0.fill(0.0);
    s.sigma_sq.fill(1.0);
    assert!((sm.log_likelihood_rho(0.5, 1, &s) - 0.75f64.ln()).abs() < 1e-12);
    assert_eq!(sm.log_likelihood_rho(1.2, 1, &s), f64::NEG_INFINITY);
}

#[test]
fn explosive_current_rho_aborts() {
    let panel = small_panel(4, 5);
    let w = WeightSequence::constant(panel.unit_ids.clone(), ring(4));
    let cfg = ModelConfig::for_variant(Variant::C5);
    let v = validate_inputs(&panel, Some(&w), &cfg).unwrap();
    let sm = Sampler::new(&v);
    let mut s = sm.initial_state();
    s.rho_path.fill(1.5);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(
        sm.draw_rho_path(&mut s, &mut rng),
        Err(SamplerError::InvalidState { t: 1, .. })
    ));
}

#[test]
fn non_positive_variance_is_rejected() {
    let panel = small_panel(3, 5);
    let cfg = ModelConfig::for_variant(Variant::C3);
    let v = validate_inputs(&panel, None, &cfg).unwrap();
    let sm = Sampler::new(&v);
    let mut s = sm.initial_state();
    s.sigma_sq[1] = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let err = sm.sweep(&mut s, &mut rng).unwrap_err();
    assert!(matches!(err, SamplerError::NonPositiveVariance { ref unit, .. } if unit == "u1"));
}

#[test]
fn network_modes_shape_the_rho_path() {
    let (panel, w) = noisy_panel(5, 8, 0.3, 0.05, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let none = ModelConfig::for_variant(Variant::C3);
    let v = validate_inputs(&panel, None, &none).unwrap();
    let sm = Sampler::new(&v);
    let mut s = sm.initial_state();
    for _ in 0..20 {
        assert_eq!(sm.sweep(&mut s, &mut rng).unwrap(), RhoMove::Skipped);
    }
    assert!(s.rho_path.iter().all(|r| *r == 0.0));

    let constant = ModelConfig::for_variant(Variant::B3);
    let v = validate_inputs(&panel, Some(&w), &constant).unwrap();
    let sm = Sampler::new(&v);
    let mut s = sm.initial_state();
    let mut moved = false;
    for _ in 0..50 {
        moved |= sm.sweep(&mut s, &mut rng).unwrap() == RhoMove::Constant(true);
        assert!(s.rho_path.iter().all(|r| *r == s.rho_path[0]));
    }
    assert!(moved);
}

#[test]
fn error_variance_draws_match_inverse_gamma_mean() {
    let (panel, _) = noisy_panel(3, 20, 0.0, 0.2, 6);
    let cfg = ModelConfig::for_variant(Variant::B1);
    let v = validate_inputs(&panel, None, &cfg).unwrap();
    let sm = Sampler::new(&v);
    let mut s = sm.initial_state();
    let (shape, rate) = sm.sigma_posterior(&s, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 10_000;
    let mut total = 0.0;
    for _ in 0..n {
        sm.draw_sigma_sq(&mut s, &mut rng);
        total += s.sigma_sq[0];
    }
    assert!(rel(total / n as f64, inv_gamma_mean(shape, rate)) < 0.02);

    s.rho_path = DVector::from_vec(vec![0.0, 0.1, 0.3, 0.2, 0.25]);
    let (shape, rate) = varsigma_posterior(s.rho_path.as_slice(), &cfg.priors);
    let mut total = 0.0;
    for _ in 0..n {
        sm.draw_varsigma_sq(&mut s, &mut rng);
        total += s.varsigma_sq;
    }
    assert!(rel(total / n as f64, inv_gamma_mean(shape, rate)) < 0.02);
}

fn short_chain(seed: u64) -> crate::data_model::PosteriorDraws {
    let (panel, w) = noisy_panel(5, 12, 0.4, 0.05, 12);
    let cfg = ModelConfig::for_variant(Variant::C5).with_chain(50, 60, 2).with_seed(seed);
    run_mcmc(&panel, Some(&w), &cfg).unwrap()
}

#[test]
fn chains_are_deterministic_in_the_seed() {
    let a = short_chain(21);
    let b = short_chain(21);
    let c = short_chain(22);
    assert_eq!(a.draws, b.draws);
    assert_ne!(a.draws, c.draws);
    assert_eq!(a.draws.len(), 30);
    assert_eq!(a.diagnostics.rho_accept_rate.len(), 12);
    assert!(a.diagnostics.rho_accept_rate.iter().all(|r| (0.0..=1.0).contains(r)));
    for d in &a.draws {
        d.validate().unwrap();
    }
}

#[cfg(feature = "parallel")]
#[test]
fn single_thread_pool_gives_identical_draws() {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let seq = pool.install(|| short_chain(5));
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let par = wide.install(|| short_chain(5));
    assert_eq!(seq.draws, par.draws);
}

#[test]
fn implied_reduced_form_covariance_is_positive_definite() {
    let (panel, w) = noisy_panel(5, 12, 0.4, 0.05, 12);
    let out = short_chain(3);
    for d in &out.draws {
        for t in 0..panel.n_periods() {
            let m = w.entries[0].matrix.clone();
            let a = DMatrix::identity(5, 5) - m * d.rho_at(t);
            let inv = a.try_inverse().unwrap();
            let cov = &inv * DMatrix::from_diagonal(&d.sigma_sq) * inv.transpose();
            assert!(cov.cholesky().is_some());
        }
    }
}

#[test]
fn constant_rho_is_recovered() {
    let (panel, w) = noisy_panel(10, 60, 0.5, 0.05, 31);
    let cfg = ModelConfig::for_variant(Variant::B3).with_chain(500, 1500, 1).with_seed(2);
    let out = run_mcmc(&panel, Some(&w), &cfg).unwrap();
    let rho: Vec<f64> = out.draws.iter().map(|d| d.rho_path[1]).collect();
    let m = crate::stats::mean(&rho);
    assert!((m - 0.5).abs() < 0.1, "posterior mean {m}");
    let rate = out.diagnostics.rho_accept_rate[0];
    assert!((0.05..0.95).contains(&rate), "acceptance {rate}");
}
