//! On-disk posterior draw bundle: one draw-major CSV per parameter block plus a JSON
//! manifest holding the configuration, seed and sampler diagnostics.
//!
//! Floats are written in shortest round-trip form, so reading a bundle back yields
//! bit-identical draws and identical chains produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{ModelConfig, ParameterState, PosteriorDraws, SweepDiagnostics};

pub const MANIFEST_FILE: &str = "draws.json";
pub const THETA0_FILE: &str = "theta0.csv";
pub const OMEGA_FILE: &str = "omega_sqrt.csv";
pub const SIGMA_FILE: &str = "sigma_sq.csv";
pub const RHO_FILE: &str = "rho.csv";
pub const VARSIGMA_FILE: &str = "varsigma_sq.csv";
pub const PATHS_FILE: &str = "theta_tilde.csv";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub config: ModelConfig,
    pub seed: u64,
    pub unit_ids: Vec<String>,
    pub n_periods: usize,
    pub n_coefs: usize,
    pub n_draws: usize,
    /// Whether `theta_tilde.csv` was written.
    pub paths_stored: bool,
    pub diagnostics: SweepDiagnostics,
}

/// Column label of coefficient `j`: `alpha` for the intercept, `beta<k>` otherwise.
pub fn coef_name(j: usize) -> String {
    if j == 0 {
        "alpha".into()
    } else {
        format!("beta{j}")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Sink {
    path: PathBuf,
    w: BufWriter<File>,
}

impl Sink {
    fn create(path: PathBuf) -> Result<Self, BundleError> {
        let f = File::create(&path).map_err(io_err(&path))?;
        Ok(Self {
            w: BufWriter::new(f),
            path,
        })
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) -> Result<(), BundleError> {
        let line = cells.into_iter().collect::<Vec<_>>().join(",");
        writeln!(self.w, "{line}").map_err(io_err(&self.path))
    }

    fn finish(mut self) -> Result<(), BundleError> {
        self.w.flush().map_err(io_err(&self.path))
    }
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn unit_coef_header(ids: &[String], p: usize) -> Vec<String> {
    ids.iter()
        .flat_map(|u| (0..p).map(move |j| format!("{u}:{}", coef_name(j))))
        .collect()
}

/// Writes `draws` into `dir`; `store_paths = false` omits the `N x T x (K+1)` coefficient
/// paths, which dominate the bundle size on long panels.
pub fn write_bundle(
    dir: &Path,
    draws: &PosteriorDraws,
    unit_ids: &[String],
    store_paths: bool,
) -> Result<(), BundleError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let first = draws.draws.first();
    let (n, t_len, p) = first.map_or((unit_ids.len(), 0, 0), |d| {
        (d.n_units(), d.n_periods(), d.n_coefs())
    });

    let manifest = BundleManifest {
        format_version: 1,
        config: draws.config.clone(),
        seed: draws.config.rng_seed,
        unit_ids: unit_ids.to_vec(),
        n_periods: t_len,
        n_coefs: p,
        n_draws: draws.draws.len(),
        paths_stored: store_paths,
        diagnostics: draws.diagnostics.clone(),
    };
    let mpath = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&mpath, text + "\n").map_err(io_err(&mpath))?;

    let uc = unit_coef_header(unit_ids, p);
    let mut theta0 = Sink::create(dir.join(THETA0_FILE))?;
    let mut omega = Sink::create(dir.join(OMEGA_FILE))?;
    let mut sigma = Sink::create(dir.join(SIGMA_FILE))?;
    let mut rho = Sink::create(dir.join(RHO_FILE))?;
    let mut vs = Sink::create(dir.join(VARSIGMA_FILE))?;
    let mut paths = if store_paths {
        Some(Sink::create(dir.join(PATHS_FILE))?)
    } else {
        None
    };
    let head = |rest: Vec<String>| std::iter::once("draw".to_string()).chain(rest);
    theta0.row(head(uc.clone()))?;
    omega.row(head(uc.clone()))?;
    sigma.row(head(unit_ids.to_vec()))?;
    rho.row(head((0..=t_len).map(|t| format!("rho_{t}")).collect()))?;
    vs.row(head(vec!["varsigma_sq".into()]))?;
    if let Some(s) = paths.as_mut() {
        s.row(["draw".to_string(), "t".to_string()].into_iter().chain(uc.clone()))?;
    }

    for (d, st) in draws.draws.iter().enumerate() {
        let lead = || std::iter::once(d.to_string());
        let by_unit = |m: &DMatrix<f64>| -> Vec<String> {
            (0..n).flat_map(|i| (0..p).map(move |j| num(m[(i, j)]))).collect()
        };
        theta0.row(lead().chain(by_unit(&st.theta0)))?;
        omega.row(lead().chain(by_unit(&st.omega_sqrt)))?;
        sigma.row(lead().chain(st.sigma_sq.iter().map(|v| num(*v))))?;
        rho.row(lead().chain(st.rho_path.iter().map(|v| num(*v))))?;
        vs.row(lead().chain(std::iter::once(num(st.varsigma_sq))))?;
        if let Some(s) = paths.as_mut() {
            for t in 0..t_len {
                let cells = (0..n).flat_map(|i| (0..p).map(move |j| num(st.theta_tilde[i][(t, j)])));
                s.row(lead().chain(std::iter::once(t.to_string())).chain(cells))?;
            }
        }
    }
    theta0.finish()?;
    omega.finish()?;
    sigma.finish()?;
    rho.finish()?;
    vs.finish()?;
    if let Some(s) = paths {
        s.finish()?;
    }
    Ok(())
}

fn read_rows(path: &Path, width: usize) -> Result<Vec<Vec<f64>>, BundleError> {
    let fmt = |msg: String| BundleError::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| fmt(e.to_string()))?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        if rec.len() != width {
            return Err(fmt(format!(
                "line {}: expected {width} fields, found {}",
                line + 2,
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| fmt(format!("line {}: {e}", line + 2)))?;
        out.push(row);
    }
    Ok(out)
}

pub fn read_manifest(dir: &Path) -> Result<BundleManifest, BundleError> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| BundleError::Format {
        path,
        msg: e.to_string(),
    })
}

/// Reads a bundle written by [`write_bundle`]. Without stored paths, `theta_tilde` is
/// zero, i.e. draws carry their time-constant base coefficients only.
pub fn read_bundle(dir: &Path) -> Result<(BundleManifest, PosteriorDraws), BundleError> {
    let m = read_manifest(dir)?;
    let (n, t_len, p, d) = (m.unit_ids.len(), m.n_periods, m.n_coefs, m.n_draws);
    let theta0 = read_rows(&dir.join(THETA0_FILE), 1 + n * p)?;
    let omega = read_rows(&dir.join(OMEGA_FILE), 1 + n * p)?;
    let sigma = read_rows(&dir.join(SIGMA_FILE), 1 + n)?;
    let rho = read_rows(&dir.join(RHO_FILE), 2 + t_len)?;
    let vs = read_rows(&dir.join(VARSIGMA_FILE), 2)?;
    let paths = if m.paths_stored {
        Some(read_rows(&dir.join(PATHS_FILE), 2 + n * p)?)
    } else {
        None
    };
    let count_ok = [&theta0, &omega, &sigma, &rho, &vs]
        .iter()
        .all(|b| b.len() == d)
        && paths.as_ref().is_none_or(|r| r.len() == d * t_len);
    if !count_ok {
        return Err(BundleError::Format {
            path: dir.to_path_buf(),
            msg: format!("parameter files disagree with the manifest's {d} draws"),
        });
    }

    let mut draws = Vec::with_capacity(d);
    for k in 0..d {
        let mut s = ParameterState::zeros(n, t_len, p);
        s.theta0 = DMatrix::from_row_slice(n, p, &theta0[k][1..]);
        s.omega_sqrt = DMatrix::from_row_slice(n, p, &omega[k][1..]);
        s.sigma_sq = DVector::from_row_slice(&sigma[k][1..]);
        s.rho_path = DVector::from_row_slice(&rho[k][1..]);
        s.varsigma_sq = vs[k][1];
        if let Some(rows) = &paths {
            for t in 0..t_len {
                let r = &rows[k * t_len + t][2..];
                for i in 0..n {
                    for j in 0..p {
                        s.theta_tilde[i][(t, j)] = r[i * p + j];
                    }
                }
            }
        }
        draws.push(s);
    }
    let post = PosteriorDraws {
        draws,
        config: m.config.clone(),
        diagnostics: m.diagnostics.clone(),
    };
    Ok((m, post))
}
