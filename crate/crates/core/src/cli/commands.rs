use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use nalgebra::DMatrix;

use super::{
    prepare_out, ClusterArgs, CorrelateArgs, EstimateArgs, ManifestBuilder, NetworkShape,
    ReportArgs, RunManifest, ShocksArgs, SimulateArgs, WeightsArgs,
};
use crate::bundle::write_bundle;
use crate::clustering::{cluster_posterior, ClusterOptions, ClusterRun};
use crate::data_model::{ModelConfig, NetworkMode, PosteriorDraws, Variant};
use crate::error::{Error, Result};
use crate::impacts::{aggregate_draws, parameter_bands, EffectPair, ImpactReport, ParameterBands};
use crate::ingest::{self, fmt_f64};
use crate::sampler::run_chains;
use crate::stats::Band;
use crate::synth::{self, DgpSpec, ShockGenerator, WeightGenerator};
use crate::weights::stitch;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const EFFECT_PAIRS_FILE: &str = "effect_pairs.csv";
pub const HEATMAP_FILE: &str = "heatmap.csv";
pub const IMPACT_DRAWS_FILE: &str = "impact_draws.csv";
pub const ROW_SUMS_FILE: &str = "row_sums.csv";
pub const K_DISTRIBUTION_FILE: &str = "k_distribution.csv";
pub const INCLUSION_FILE: &str = "inclusion.csv";
pub const CENTERS_FILE: &str = "centers.csv";
pub const REPORT_FILE: &str = "table.csv";
pub const SHOCKS_FILE: &str = "shocks.csv";
pub const CORRELATIONS_FILE: &str = "correlations.csv";
pub const ALIGNED_FILE: &str = "aligned.csv";

/// Label used in summaries for configurations that match none of the named variants.
pub const CUSTOM_LABEL: &str = "custom";

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// weights

pub fn cmd_weights(a: &WeightsArgs) -> Result<RunManifest> {
    prepare_out(&a.out)?;
    let mut mb = ManifestBuilder::new("weights");
    mb.input(&a.config)?;
    let (tables, cutovers) = ingest::read_vintage_manifest(&a.config)?;
    let (seq, built) = stitch(&tables, &cutovers)?;
    seq.validate()?;
    ingest::write_weight_sequence(&a.out.out, &seq)?;
    let mut sums = String::from("vintage,industry_id,raw_row_sum\n");
    for (v, b) in tables.iter().zip(&built) {
        for (id, s) in seq.unit_ids.iter().zip(b.raw_row_sums.iter()) {
            writeln!(sums, "{},{id},{}", v.vintage, fmt_f64(*s)).unwrap();
        }
    }
    write_text(&a.out.out.join(ROW_SUMS_FILE), &sums)?;
    info!("wrote {} weight matrices", seq.entries.len());
    mb.finish(&a.out.out)
}

// ---------------------------------------------------------------------------
// simulate

pub fn cmd_simulate(a: &SimulateArgs) -> Result<RunManifest> {
    prepare_out(&a.out)?;
    let mut mb = ManifestBuilder::new("simulate");
    mb.seed(a.seed);
    let (n, t) = (a.units, a.periods);
    let base = DgpSpec::constant(n, t, &[a.alpha, a.beta], a.rho, a.sigma_sq, a.seed);
    // separate substream so the panel draw does not depend on the path settings
    let mut rng = crate::linalg::substream(a.seed, 1);
    let theta = if a.omega_sqrt > 0.0 {
        let theta0 = DMatrix::from_fn(n, 2, |_, j| if j == 0 { a.alpha } else { a.beta });
        let om = DMatrix::from_element(n, 2, a.omega_sqrt);
        synth::random_walk_paths(&theta0, &om, t, &mut rng)
    } else {
        base.theta.clone()
    };
    let rho = if a.varsigma_sq > 0.0 {
        synth::random_walk_rho(a.rho, a.varsigma_sq, t, &mut rng)
    } else {
        vec![a.rho]
    };
    let weights = match (&a.weights, a.network) {
        (Some(p), _) => {
            mb.input(p)?;
            WeightGenerator::FromFile(p.clone())
        }
        (None, NetworkShape::Ring) => WeightGenerator::Ring,
        (None, NetworkShape::Random) => WeightGenerator::RandomRowStochastic,
    };
    let spec = DgpSpec {
        theta,
        rho,
        weights,
        shock: ShockGenerator {
            mean: 0.0,
            sd: a.shock_sd,
        },
        ..base
    };
    let sim = synth::simulate(&spec)?;
    synth::write_simulated(&a.out.out, &sim)?;
    mb.finish(&a.out.out)
}

// ---------------------------------------------------------------------------
// estimate

/// Everything `estimate` computes, for callers that continue in-process.
#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub config: ModelConfig,
    pub chains: Vec<PosteriorDraws>,
    pub report: ImpactReport,
    pub bands: ParameterBands,
    pub manifest: RunManifest,
}

/// Bundle directory of chain `c`: `draws` for a single chain, `draws_chain<c>` otherwise.
pub fn bundle_dir(out: &Path, c: usize, chains: usize) -> PathBuf {
    if chains == 1 {
        out.join("draws")
    } else {
        out.join(format!("draws_chain{c}"))
    }
}

fn resolve_config(a: &EstimateArgs, mb: Option<&mut ManifestBuilder>) -> Result<ModelConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            if let Some(mb) = mb {
                mb.input(p)?;
            }
            ingest::read_config(p)?
        }
        None => ModelConfig::for_variant(a.variant.unwrap_or(Variant::C5)),
    };
    if let Some(v) = a.variant {
        (cfg.heterogeneity, cfg.network, cfg.data_shape) = v.spec();
    }
    if let Some(s) = a.seed {
        cfg.rng_seed = s;
    }
    Ok(cfg)
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<EstimateOutput> {
    if a.chains == 0 {
        return Err(Error::Usage("--chains must be at least 1".into()));
    }
    prepare_out(&a.out)?;
    let out = &a.out.out;
    let mut mb = ManifestBuilder::new("estimate");
    let cfg = resolve_config(a, Some(&mut mb))?;

    let panel_path = a.data.join(ingest::PANEL_FILE);
    mb.input(&panel_path)?;
    let panel = ingest::read_panel(&panel_path, !a.unit_covariates)?;
    let weights = if cfg.network == NetworkMode::None {
        None
    } else {
        let wp = a.data.join(ingest::WEIGHTS_MANIFEST);
        mb.input(&wp)?;
        Some(ingest::read_weight_manifest(&wp)?)
    };

    info!(
        "estimating {} on N = {}, T = {} with {} chain(s)",
        cfg.variant().map_or(CUSTOM_LABEL.to_string(), |v| v.to_string()),
        panel.n_units(),
        panel.n_periods(),
        a.chains
    );
    let chains = run_chains(&panel, weights.as_ref(), &cfg, a.chains)?;
    for (c, post) in chains.iter().enumerate() {
        let dir = bundle_dir(out, c, a.chains);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        write_bundle(&dir, post, &panel.unit_ids, !a.skip_paths)?;
    }

    let pooled = PosteriorDraws {
        draws: chains.iter().flat_map(|c| c.draws.iter().cloned()).collect(),
        config: cfg.clone(),
        diagnostics: chains[0].diagnostics.clone(),
    };
    let k = cfg.effect_covariate;
    let networked = cfg.network != NetworkMode::None;
    let report = aggregate_draws(&pooled, &panel, weights.as_ref(), k)?;
    let bands = parameter_bands(&pooled, k, networked);

    let label = cfg.variant().map_or(CUSTOM_LABEL.to_string(), |v| v.to_string());
    write_text(&out.join(SUMMARY_FILE), &summary_csv(&label, &bands, &report, networked))?;
    write_text(&out.join(EFFECT_PAIRS_FILE), &effect_pairs_csv(&panel.unit_ids, &report.effect_pairs))?;
    write_text(&out.join(HEATMAP_FILE), &heatmap_csv(&panel, &report))?;
    write_text(&out.join(IMPACT_DRAWS_FILE), &impact_draws_csv(&report))?;

    mb.config(&cfg);
    let manifest = mb.finish(out)?;
    Ok(EstimateOutput {
        config: cfg,
        chains,
        report,
        bands,
        manifest,
    })
}

const SUMMARY_BLOCKS: [&str; 8] = [
    "alpha", "beta", "sigma_sq", "rho", "indirect", "direct", "total", "share",
];

pub fn summary_header() -> String {
    let mut h = String::from("variant");
    for b in SUMMARY_BLOCKS {
        write!(h, ",{b}_median,{b}_lower,{b}_upper").unwrap();
    }
    h
}

/// One row in the layout of the comparison table: medians and 99% bands of the
/// parameters and effects; network columns stay blank without a network.
pub fn summary_csv(label: &str, p: &ParameterBands, r: &ImpactReport, networked: bool) -> String {
    let cells = |b: Option<&Band>| match b {
        Some(b) => format!("{},{},{}", fmt_f64(b.median), fmt_f64(b.lower), fmt_f64(b.upper)),
        None => ",,".to_string(),
    };
    let row = [
        cells(Some(&p.alpha)),
        cells(Some(&p.beta)),
        cells(Some(&p.sigma_sq)),
        cells(p.rho.as_ref().filter(|_| networked)),
        cells(Some(&r.indirect).filter(|_| networked)),
        cells(Some(&r.direct)),
        cells(Some(&r.total)),
        cells(r.share.as_ref().filter(|_| networked)),
    ];
    format!("{}\n{label},{}\n", summary_header(), row.join(","))
}

pub fn effect_pairs_csv(ids: &[String], pairs: &[Vec<EffectPair>]) -> String {
    let mut s = String::from("draw,unit_id,total,share\n");
    for (d, row) in pairs.iter().enumerate() {
        for (id, (total, share)) in ids.iter().zip(row) {
            writeln!(s, "{d},{id},{},{}", fmt_f64(*total), opt(*share)).unwrap();
        }
    }
    s
}

fn heatmap_csv(panel: &crate::data_model::PanelData, r: &ImpactReport) -> String {
    let mut s = String::from("t,date,unit_id,direct,indirect,total,share\n");
    for c in &r.heatmap {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            c.t,
            panel.event_dates[c.t],
            panel.unit_ids[c.unit],
            fmt_f64(c.direct),
            fmt_f64(c.indirect),
            fmt_f64(c.total),
            opt(c.share)
        )
        .unwrap();
    }
    s
}

fn impact_draws_csv(r: &ImpactReport) -> String {
    let mut s = String::from("draw,avg_direct,avg_indirect,avg_total,share\n");
    for (d, e) in r.per_draw.iter().enumerate() {
        writeln!(
            s,
            "{d},{},{},{},{}",
            fmt_f64(e.avg_direct),
            fmt_f64(e.avg_indirect),
            fmt_f64(e.avg_total),
            opt(e.share)
        )
        .unwrap();
    }
    s
}

// ---------------------------------------------------------------------------
// cluster

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Ingest(ingest::IngestError::Parse {
        file: path.display().to_string(),
        line,
        msg: msg.into(),
    })
}

/// Reads `effect_pairs.csv` into unit ids and `[draw][unit]` pairs.
pub fn read_effect_pairs(path: &Path) -> Result<(Vec<String>, Vec<Vec<EffectPair>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "draw,unit_id,total,share" => {}
        _ => return Err(parse_err(path, 1, "expected header draw,unit_id,total,share")),
    }
    let mut ids: Vec<String> = Vec::new();
    let mut pairs: Vec<Vec<EffectPair>> = Vec::new();
    for (idx, line) in lines {
        let ln = idx + 1;
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(parse_err(path, ln, format!("expected 4 fields, found {}", f.len())));
        }
        let d: usize = f[0].parse().map_err(|_| parse_err(path, ln, "bad draw index"))?;
        let total: f64 = f[2].parse().map_err(|_| parse_err(path, ln, "bad total"))?;
        let share = if f[3].is_empty() {
            None
        } else {
            Some(f[3].parse::<f64>().map_err(|_| parse_err(path, ln, "bad share"))?)
        };
        if d == pairs.len() {
            pairs.push(Vec::new());
        } else if d + 1 != pairs.len() {
            return Err(parse_err(path, ln, "draws must be contiguous and ascending"));
        }
        let pos = pairs[d].len();
        if d == 0 {
            ids.push(f[1].to_string());
        } else if ids.get(pos).map(String::as_str) != Some(f[1]) {
            return Err(parse_err(path, ln, format!("unit '{}' out of order", f[1])));
        }
        pairs[d].push((total, share));
    }
    if pairs.iter().any(|p| p.len() != ids.len()) {
        return Err(parse_err(path, 0, "draws list different numbers of units"));
    }
    Ok((ids, pairs))
}

pub fn cmd_cluster(a: &ClusterArgs) -> Result<(ClusterRun, RunManifest)> {
    prepare_out(&a.out)?;
    let mut mb = ManifestBuilder::new("cluster");
    mb.seed(a.seed);
    let path = a.data.join(EFFECT_PAIRS_FILE);
    mb.input(&path)?;
    let (ids, pairs) = read_effect_pairs(&path)?;
    let run = cluster_posterior(
        &pairs,
        &ClusterOptions {
            k_fixed: a.k_fixed,
            k_max: a.k_max,
            seed: a.seed,
            standardize: a.standardize,
        },
    )?;
    let out = &a.out.out;

    let mut kd = String::from("k,probability\n");
    for (k, p) in &run.k_distribution {
        writeln!(kd, "{k},{}", fmt_f64(*p)).unwrap();
    }
    write_text(&out.join(K_DISTRIBUTION_FILE), &kd)?;

    let mut inc = String::from("unit_id");
    for c in 1..=a.k_fixed {
        write!(inc, ",cluster_{c}").unwrap();
    }
    inc.push('\n');
    for (i, id) in ids.iter().enumerate() {
        inc.push_str(id);
        for c in 0..a.k_fixed {
            write!(inc, ",{}", fmt_f64(run.inclusion_prob[(i, c)])).unwrap();
        }
        inc.push('\n');
    }
    write_text(&out.join(INCLUSION_FILE), &inc)?;

    let mut ce = String::from("draw,cluster,total,share\n");
    for (d, centers) in run.centers.iter().enumerate() {
        for (c, p) in centers.iter().enumerate() {
            writeln!(ce, "{d},{},{},{}", c + 1, fmt_f64(p[0]), fmt_f64(p[1])).unwrap();
        }
    }
    write_text(&out.join(CENTERS_FILE), &ce)?;
    info!(
        "clustered {} draws ({} skipped for undefined shares)",
        run.used_draws, run.skipped_draws
    );
    let m = mb.finish(out)?;
    Ok((run, m))
}

// ---------------------------------------------------------------------------
// report

fn variant_rank(label: &str) -> usize {
    label
        .parse::<Variant>()
        .ok()
        .and_then(|v| Variant::ALL.iter().position(|x| *x == v))
        .unwrap_or(Variant::ALL.len())
}

pub fn cmd_report(a: &ReportArgs) -> Result<RunManifest> {
    prepare_out(&a.out)?;
    let mut mb = ManifestBuilder::new("report");
    let header = summary_header();
    let mut rows: Vec<String> = Vec::new();
    for dir in &a.data {
        let path = dir.join(SUMMARY_FILE);
        mb.input(&path)?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut lines = text.lines();
        if lines.next() != Some(header.as_str()) {
            return Err(parse_err(&path, 1, "unexpected summary header"));
        }
        rows.extend(lines.filter(|l| !l.trim().is_empty()).map(str::to_string));
    }
    // stable: runs of the same variant keep their command-line order
    rows.sort_by_key(|r| variant_rank(r.split(',').next().unwrap_or("")));
    let mut s = header;
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    write_text(&a.out.out.join(REPORT_FILE), &s)?;
    mb.finish(&a.out.out)
}

// ---------------------------------------------------------------------------
// shocks and indices

pub fn cmd_shocks(a: &ShocksArgs) -> Result<RunManifest> {
    prepare_out(&a.out)?;
    let mut mb = ManifestBuilder::new("shocks");
    mb.input(&a.data)?;
    let mut s = String::from("date,shock\n");
    for (d, inputs) in ingest::read_shocks(&a.data)? {
        writeln!(s, "{d},{}", fmt_f64(ingest::policy_shock(&inputs)?)).unwrap();
    }
    write_text(&a.out.out.join(SHOCKS_FILE), &s)?;
    mb.finish(&a.out.out)
}

pub fn cmd_correlate(a: &CorrelateArgs) -> Result<RunManifest> {
    prepare_out(&a.out)?;
    let mut mb = ManifestBuilder::new("correlate");
    let mut labels = Vec::new();
    let mut series = Vec::new();
    let mut targets = Vec::new();
    for (k, p) in a.data.iter().enumerate() {
        mb.input(p)?;
        let (dates, values) = ingest::read_index(p)?;
        let aligned = if k == 0 {
            targets = dates;
            values
        } else {
            ingest::nearest_match(&ingest::monthly_means(&dates, &values), &targets)
        };
        series.push(ingest::unit_normalize(&aligned)?);
        labels.push(
            p.file_stem()
                .map_or_else(|| format!("series{k}"), |s| s.to_string_lossy().into_owned()),
        );
    }
    let table = ingest::correlation_table(&series, &labels)?;

    let mut al = format!("date,{}\n", labels.join(","));
    for (t, d) in targets.iter().enumerate() {
        al.push_str(&d.to_string());
        for s in &series {
            write!(al, ",{}", fmt_f64(s[t])).unwrap();
        }
        al.push('\n');
    }
    write_text(&a.out.out.join(ALIGNED_FILE), &al)?;

    let mut s = String::from("row,col,r,p_value,stars\n");
    for (i, li) in labels.iter().enumerate() {
        for (j, lj) in labels.iter().enumerate() {
            let c = table.get(i, j);
            writeln!(s, "{li},{lj},{},{},{}", fmt_f64(c.r), fmt_f64(c.p_value), c.stars).unwrap();
        }
    }
    write_text(&a.out.out.join(CORRELATIONS_FILE), &s)?;
    mb.finish(&a.out.out)
}
