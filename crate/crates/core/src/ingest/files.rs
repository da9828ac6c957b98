//! Readers and writers for every on-disk format: panel, weight matrices, configuration,
//! shocks, comparison indices and make/use tables. Parse errors carry `file:line`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::{IngestError, ShockInputs};
use crate::data_model::{
    open_start, ChainSchedule, ModelConfig, PanelData, PriorSpec, Variant, WeightEntry,
    WeightSequence,
};
use crate::weights::IoTables;

pub const PANEL_FILE: &str = "panel.csv";
pub const WEIGHTS_MANIFEST: &str = "weights_manifest.csv";
pub const VINTAGE_MANIFEST: &str = "vintages.csv";
pub const CONFIG_FILE: &str = "config.txt";

/// Rows whose sums are within this distance of one are rescaled on load.
pub const LOAD_RENORMALIZE_TOL: f64 = 1e-6;

const DATE_FMT: &str = "%Y-%m-%d";
const OPEN_START_LABEL: &str = "start";

struct Table {
    file: String,
    header: Vec<String>,
    /// `(line number, fields)`
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn err(&self, line: usize, msg: impl Into<String>) -> IngestError {
        IngestError::Parse {
            file: self.file.clone(),
            line,
            msg: msg.into(),
        }
    }

    fn expect_header(&self, want: &[&str]) -> Result<(), IngestError> {
        if self.header.len() < want.len()
            || self.header.iter().zip(want).any(|(h, w)| !h.eq_ignore_ascii_case(w))
        {
            return Err(self.err(
                1,
                format!("expected header '{}', found '{}'", want.join(","), self.header.join(",")),
            ));
        }
        Ok(())
    }

    fn num(&self, line: usize, row: &[String], col: usize) -> Result<f64, IngestError> {
        let cell = row
            .get(col)
            .ok_or_else(|| self.err(line, format!("missing column {}", col + 1)))?;
        let v: f64 = cell.parse().map_err(|_| {
            self.err(
                line,
                format!("column '{}': cannot parse '{cell}' as a number", self.col_name(col)),
            )
        })?;
        if !v.is_finite() {
            return Err(self.err(line, format!("column '{}': non-finite value", self.col_name(col))));
        }
        Ok(v)
    }

    fn int(&self, line: usize, row: &[String], col: usize) -> Result<u32, IngestError> {
        let cell = row
            .get(col)
            .ok_or_else(|| self.err(line, format!("missing column {}", col + 1)))?;
        cell.parse().map_err(|_| {
            self.err(
                line,
                format!("column '{}': cannot parse '{cell}' as an integer", self.col_name(col)),
            )
        })
    }

    fn date(&self, line: usize, cell: &str) -> Result<NaiveDate, IngestError> {
        NaiveDate::parse_from_str(cell, DATE_FMT)
            .map_err(|_| self.err(line, format!("cannot parse '{cell}' as a YYYY-MM-DD date")))
    }

    fn col_name(&self, col: usize) -> &str {
        self.header.get(col).map_or("?", String::as_str)
    }
}

fn read_table(path: &Path) -> Result<Table, IngestError> {
    let file = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| IngestError::Csv(format!("{file}: {e}")))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| IngestError::Csv(format!("{file}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            IngestError::Parse {
                file: file.clone(),
                line,
                msg: e.to_string(),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(IngestError::Parse {
                file,
                line,
                msg: format!("{} fields, header has {}", rec.len(), header.len()),
            });
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Table { file, header, rows })
}

fn write_text(path: &Path, text: &str) -> Result<(), IngestError> {
    fs::write(path, text).map_err(|e| IngestError::Csv(format!("{}: {e}", path.display())))
}

/// Shortest round-trip decimal representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn resolve(base: &Path, name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

// ---------------------------------------------------------------------------
// panel

/// Reads a long-format panel `unit_id,date,y,x1..xK`. Units keep their order of first
/// appearance; dates are sorted. Every (unit, date) cell must appear exactly once.
pub fn read_panel(path: &Path, common_shock: bool) -> Result<PanelData, IngestError> {
    let tab = read_table(path)?;
    tab.expect_header(&["unit_id", "date", "y"])?;
    let k = tab.header.len() - 3;
    if k == 0 {
        return Err(tab.err(1, "at least one covariate column x1 is required"));
    }

    let mut units: Vec<String> = Vec::new();
    let mut unit_pos: HashMap<String, usize> = HashMap::new();
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut cells: HashMap<(usize, NaiveDate), (usize, Vec<f64>)> = HashMap::new();
    for (line, row) in &tab.rows {
        let u = *unit_pos.entry(row[0].clone()).or_insert_with(|| {
            units.push(row[0].clone());
            units.len() - 1
        });
        let d = tab.date(*line, &row[1])?;
        let vals = (2..3 + k)
            .map(|c| tab.num(*line, row, c))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some((prev, _)) = cells.insert((u, d), (*line, vals)) {
            return Err(tab.err(
                *line,
                format!("duplicate cell for unit {} on {d} (first at line {prev})", row[0]),
            ));
        }
        dates.push(d);
    }
    dates.sort();
    dates.dedup();
    let (n, t) = (units.len(), dates.len());
    let mut responses = DMatrix::zeros(n, t);
    let mut covariates = vec![DMatrix::zeros(n, t); k];
    for (i, u) in units.iter().enumerate() {
        for (j, d) in dates.iter().enumerate() {
            let (_, vals) = cells.get(&(i, *d)).ok_or_else(|| {
                tab.err(0, format!("unbalanced panel: no row for unit {u} on {d}"))
            })?;
            responses[(i, j)] = vals[0];
            for c in 0..k {
                covariates[c][(i, j)] = vals[c + 1];
            }
        }
    }
    Ok(PanelData {
        responses,
        covariates,
        unit_ids: units,
        event_dates: dates,
        common_shock,
    })
}

pub fn write_panel(path: &Path, panel: &PanelData) -> Result<(), IngestError> {
    let mut s = String::from("unit_id,date,y");
    for c in 1..=panel.n_covariates() {
        write!(s, ",x{c}").unwrap();
    }
    s.push('\n');
    for (i, u) in panel.unit_ids.iter().enumerate() {
        for (t, d) in panel.event_dates.iter().enumerate() {
            write!(s, "{u},{},{}", d.format(DATE_FMT), fmt_f64(panel.responses[(i, t)])).unwrap();
            for x in &panel.covariates {
                write!(s, ",{}", fmt_f64(x[(i, t)])).unwrap();
            }
            s.push('\n');
        }
    }
    write_text(path, &s)
}

// ---------------------------------------------------------------------------
// weight matrices

/// Square matrix with a leading `unit_id` column; header `unit_id,<ids>`.
pub fn read_square_matrix(path: &Path) -> Result<(Vec<String>, DMatrix<f64>), IngestError> {
    let tab = read_table(path)?;
    tab.expect_header(&["unit_id"])?;
    let cols: Vec<String> = tab.header[1..].to_vec();
    let n = cols.len();
    if tab.rows.len() != n {
        return Err(tab.err(0, format!("{} rows for {n} columns", tab.rows.len())));
    }
    let mut m = DMatrix::zeros(n, n);
    let mut ids = Vec::with_capacity(n);
    for (i, (line, row)) in tab.rows.iter().enumerate() {
        if row[0] != cols[i] {
            return Err(tab.err(
                *line,
                format!("row unit '{}' does not match column unit '{}'", row[0], cols[i]),
            ));
        }
        ids.push(row[0].clone());
        for j in 0..n {
            m[(i, j)] = tab.num(*line, row, j + 1)?;
        }
    }
    Ok((ids, m))
}

pub fn write_square_matrix(path: &Path, ids: &[String], m: &DMatrix<f64>) -> Result<(), IngestError> {
    let mut s = format!("unit_id,{}\n", ids.join(","));
    for (i, id) in ids.iter().enumerate() {
        s.push_str(id);
        for j in 0..m.ncols() {
            write!(s, ",{}", fmt_f64(m[(i, j)])).unwrap();
        }
        s.push('\n');
    }
    write_text(path, &s)
}

/// Reads `effective_from,file` rows (`start` marks the matrix in force from the beginning)
/// and the referenced matrices. Rows within [`LOAD_RENORMALIZE_TOL`] of summing to one are
/// rescaled; anything further off is left for validation to report.
pub fn read_weight_manifest(path: &Path) -> Result<WeightSequence, IngestError> {
    let tab = read_table(path)?;
    tab.expect_header(&["effective_from", "file"])?;
    let mut entries = Vec::new();
    let mut unit_ids: Option<Vec<String>> = None;
    for (line, row) in &tab.rows {
        let effective_from = if row[0].eq_ignore_ascii_case(OPEN_START_LABEL) || row[0].is_empty() {
            open_start()
        } else {
            tab.date(*line, &row[0])?
        };
        let (ids, matrix) = read_square_matrix(&resolve(path, &row[1]))?;
        match &unit_ids {
            Some(prev) if *prev != ids => {
                return Err(tab.err(*line, format!("{}: unit ordering differs from the first matrix", row[1])))
            }
            Some(_) => {}
            None => unit_ids = Some(ids),
        }
        entries.push(WeightEntry {
            effective_from,
            matrix,
        });
    }
    let mut seq = WeightSequence {
        entries,
        unit_ids: unit_ids.ok_or_else(|| tab.err(1, "manifest lists no matrices"))?,
    };
    seq.renormalize_rows(LOAD_RENORMALIZE_TOL);
    Ok(seq)
}

/// Writes one `W_<k>.csv` per entry plus the manifest into `dir`; returns the manifest path.
pub fn write_weight_sequence(dir: &Path, seq: &WeightSequence) -> Result<PathBuf, IngestError> {
    let mut manifest = String::from("effective_from,file\n");
    for (k, e) in seq.entries.iter().enumerate() {
        let name = format!("W_{k:03}.csv");
        write_square_matrix(&dir.join(&name), &seq.unit_ids, &e.matrix)?;
        let from = if e.effective_from == open_start() {
            OPEN_START_LABEL.to_string()
        } else {
            e.effective_from.format(DATE_FMT).to_string()
        };
        writeln!(manifest, "{from},{name}").unwrap();
    }
    let path = dir.join(WEIGHTS_MANIFEST);
    write_text(&path, &manifest)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// configuration

/// Parses `key = value` lines. `variant` sets heterogeneity, network and data shape; any
/// other key overrides one field. `#` starts a comment.
pub fn parse_config(text: &str, source: &str) -> Result<ModelConfig, IngestError> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| IngestError::Parse {
            file: source.into(),
            line,
            msg: format!("expected key = value, found '{body}'"),
        })?;
        pairs.push((line, k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    let perr = |line: usize, msg: String| IngestError::Parse {
        file: source.into(),
        line,
        msg,
    };

    let mut cfg = ModelConfig::default();
    // the variant goes first so that explicit fields override it regardless of order
    if let Some((line, _, v)) = pairs.iter().find(|(_, k, _)| k == "variant") {
        let variant: Variant = v.parse().map_err(|e| perr(*line, e))?;
        cfg = ModelConfig::for_variant(variant);
    }
    for (line, key, v) in &pairs {
        let line = *line;
        let f = || -> Result<f64, IngestError> {
            v.parse()
                .map_err(|_| perr(line, format!("{key}: cannot parse '{v}' as a number")))
        };
        let u = || -> Result<u64, IngestError> {
            v.parse()
                .map_err(|_| perr(line, format!("{key}: cannot parse '{v}' as an integer")))
        };
        let p: &mut PriorSpec = &mut cfg.priors;
        let c: &mut ChainSchedule = &mut cfg.chain;
        match key.as_str() {
            "variant" => {}
            "heterogeneity" => cfg.heterogeneity = v.parse().map_err(|e| perr(line, e))?,
            "network" => cfg.network = v.parse().map_err(|e| perr(line, e))?,
            "data_shape" => cfg.data_shape = v.parse().map_err(|e| perr(line, e))?,
            "a" => p.a = f()?,
            "b" => p.b = f()?,
            "mu0" => p.mu0 = f()?,
            "varsigma0_sq" => p.varsigma0_sq = f()?,
            "c_varsigma" => p.c_varsigma = f()?,
            "d_varsigma" => p.d_varsigma = f()?,
            "c_sigma" => p.c_sigma = f()?,
            "d_sigma" => p.d_sigma = f()?,
            "burn_in" => c.burn_in = u()? as usize,
            "keep" => c.keep = u()? as usize,
            "thin" => c.thin = u()? as usize,
            "rng_seed" | "seed" => cfg.rng_seed = u()?,
            "effect_covariate" => cfg.effect_covariate = u()? as usize,
            other => return Err(perr(line, format!("unknown key '{other}'"))),
        }
    }
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<ModelConfig, IngestError> {
    let text =
        fs::read_to_string(path).map_err(|e| IngestError::Csv(format!("{}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

pub fn format_config(cfg: &ModelConfig) -> String {
    let p = &cfg.priors;
    let mut s = String::new();
    if let Some(v) = cfg.variant() {
        writeln!(s, "variant = {v}").unwrap();
    }
    writeln!(s, "heterogeneity = {}", cfg.heterogeneity).unwrap();
    writeln!(s, "network = {}", cfg.network).unwrap();
    writeln!(s, "data_shape = {}", cfg.data_shape).unwrap();
    for (k, v) in [
        ("a", p.a),
        ("b", p.b),
        ("mu0", p.mu0),
        ("varsigma0_sq", p.varsigma0_sq),
        ("c_varsigma", p.c_varsigma),
        ("d_varsigma", p.d_varsigma),
        ("c_sigma", p.c_sigma),
        ("d_sigma", p.d_sigma),
    ] {
        writeln!(s, "{k} = {}", fmt_f64(v)).unwrap();
    }
    writeln!(s, "burn_in = {}", cfg.chain.burn_in).unwrap();
    writeln!(s, "keep = {}", cfg.chain.keep).unwrap();
    writeln!(s, "thin = {}", cfg.chain.thin).unwrap();
    writeln!(s, "rng_seed = {}", cfg.rng_seed).unwrap();
    writeln!(s, "effect_covariate = {}", cfg.effect_covariate).unwrap();
    s
}

pub fn write_config(path: &Path, cfg: &ModelConfig) -> Result<(), IngestError> {
    write_text(path, &format_config(cfg))
}

// ---------------------------------------------------------------------------
// shocks and indices

/// Reads `date,ff_pre,ff_post,days_in_month,day_of_meeting`.
pub fn read_shocks(path: &Path) -> Result<Vec<(NaiveDate, ShockInputs)>, IngestError> {
    let tab = read_table(path)?;
    tab.expect_header(&["date", "ff_pre", "ff_post", "days_in_month", "day_of_meeting"])?;
    tab.rows
        .iter()
        .map(|(line, row)| {
            Ok((
                tab.date(*line, &row[0])?,
                ShockInputs {
                    ff_pre: tab.num(*line, row, 1)?,
                    ff_post: tab.num(*line, row, 2)?,
                    days_in_month: tab.int(*line, row, 3)?,
                    day_of_meeting: tab.int(*line, row, 4)?,
                },
            ))
        })
        .collect()
}

/// Reads a dated series `date,value`.
pub fn read_index(path: &Path) -> Result<(Vec<NaiveDate>, Vec<f64>), IngestError> {
    let tab = read_table(path)?;
    tab.expect_header(&["date", "value"])?;
    let mut dates = Vec::with_capacity(tab.rows.len());
    let mut values = Vec::with_capacity(tab.rows.len());
    for (line, row) in &tab.rows {
        dates.push(tab.date(*line, &row[0])?);
        values.push(tab.num(*line, row, 1)?);
    }
    Ok((dates, values))
}

// ---------------------------------------------------------------------------
// make / use tables

/// Rectangular table with a leading label column: `(row ids, column ids, values)`.
pub fn read_labeled_matrix(
    path: &Path,
    label: &str,
) -> Result<(Vec<String>, Vec<String>, DMatrix<f64>), IngestError> {
    let tab = read_table(path)?;
    tab.expect_header(&[label])?;
    let cols = tab.header[1..].to_vec();
    let mut m = DMatrix::zeros(tab.rows.len(), cols.len());
    let mut rows = Vec::with_capacity(tab.rows.len());
    for (i, (line, row)) in tab.rows.iter().enumerate() {
        rows.push(row[0].clone());
        for j in 0..cols.len() {
            let v = tab.num(*line, row, j + 1)?;
            if v < 0.0 {
                return Err(tab.err(
                    *line,
                    format!("column '{}': negative dollar flow {v}", cols[j]),
                ));
            }
            m[(i, j)] = v;
        }
    }
    Ok((rows, cols, m))
}

pub fn write_labeled_matrix(
    path: &Path,
    label: &str,
    rows: &[String],
    cols: &[String],
    m: &DMatrix<f64>,
) -> Result<(), IngestError> {
    let mut s = format!("{label},{}\n", cols.join(","));
    for (i, r) in rows.iter().enumerate() {
        s.push_str(r);
        for j in 0..cols.len() {
            write!(s, ",{}", fmt_f64(m[(i, j)])).unwrap();
        }
        s.push('\n');
    }
    write_text(path, &s)
}

/// Make table: industries in rows (`industry_id`), commodities in columns. Use table:
/// commodities in rows (`commodity_id`), industries in columns.
pub fn read_io_tables(make: &Path, use_path: &Path, vintage: &str) -> Result<IoTables, IngestError> {
    let (industries, commodities, make_m) = read_labeled_matrix(make, "industry_id")?;
    let (use_rows, use_cols, use_m) = read_labeled_matrix(use_path, "commodity_id")?;
    if use_rows != commodities {
        return Err(IngestError::Parse {
            file: use_path.display().to_string(),
            line: 0,
            msg: "commodity rows do not match the make table's commodity columns".into(),
        });
    }
    if use_cols != industries {
        return Err(IngestError::Parse {
            file: use_path.display().to_string(),
            line: 1,
            msg: "industry columns do not match the make table's industry rows".into(),
        });
    }
    Ok(IoTables {
        make: make_m,
        use_table: use_m,
        industry_ids: industries,
        commodity_ids: commodities,
        vintage: vintage.to_string(),
    })
}

/// Reads `vintage,make_file,use_file,cutover`; the first row's cutover is ignored (it
/// applies from the start), later rows give the first date the vintage is in force.
pub fn read_vintage_manifest(path: &Path) -> Result<(Vec<IoTables>, Vec<NaiveDate>), IngestError> {
    let tab = read_table(path)?;
    tab.expect_header(&["vintage", "make_file", "use_file", "cutover"])?;
    let mut tables = Vec::new();
    let mut cutovers = Vec::new();
    for (k, (line, row)) in tab.rows.iter().enumerate() {
        tables.push(read_io_tables(
            &resolve(path, &row[1]),
            &resolve(path, &row[2]),
            &row[0],
        )?);
        if k > 0 {
            if row[3].is_empty() {
                return Err(tab.err(*line, format!("vintage {} needs a cutover date", row[0])));
            }
            cutovers.push(tab.date(*line, &row[3])?);
        }
    }
    if tables.is_empty() {
        return Err(tab.err(1, "manifest lists no vintages"));
    }
    Ok((tables, cutovers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::fixtures::{ring, small_panel};

    #[test]
    fn panel_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(PANEL_FILE);
        let panel = small_panel(3, 5);
        write_panel(&p, &panel).unwrap();
        let back = read_panel(&p, true).unwrap();
        assert_eq!(back, panel);
    }

    #[test]
    fn unbalanced_panel_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        fs::write(
            &p,
            "unit_id,date,y,x1\na,2001-01-03,1,0.1\nb,2001-01-03,2,0.1\na,2001-02-03,1,0.2\n",
        )
        .unwrap();
        let err = read_panel(&p, true).unwrap_err().to_string();
        assert!(err.contains("no row for unit b on 2001-02-03"), "{err}");
    }

    #[test]
    fn malformed_cell_names_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        fs::write(&p, "unit_id,date,y,x1\na,2001-01-03,1,0.1\na,2001-02-03,oops,0.2\n").unwrap();
        let err = read_panel(&p, true).unwrap_err().to_string();
        assert!(err.ends_with("p.csv:3: column 'y': cannot parse 'oops' as a number"), "{err}");
    }

    #[test]
    fn weight_manifest_round_trip_and_renormalization() {
        let dir = tempfile::tempdir().unwrap();
        let ids: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let mut m = ring(3);
        m[(0, 1)] += 3e-9;
        let seq = WeightSequence {
            entries: vec![
                WeightEntry {
                    effective_from: open_start(),
                    matrix: m,
                },
                WeightEntry {
                    effective_from: NaiveDate::from_ymd_opt(2002, 1, 30).unwrap(),
                    matrix: DMatrix::identity(3, 3),
                },
            ],
            unit_ids: ids,
        };
        let path = write_weight_sequence(dir.path(), &seq).unwrap();
        let back = read_weight_manifest(&path).unwrap();
        assert_eq!(back.entries.len(), 2);
        assert_eq!(back.entries[1].effective_from, seq.entries[1].effective_from);
        back.validate().unwrap();
    }

    #[test]
    fn config_variant_then_overrides() {
        let cfg = parse_config(
            "# test\nburn_in = 10\nvariant = B4\nkeep=20\nthin = 2\nb = 0.5\nseed = 9\n",
            "cfg",
        )
        .unwrap();
        assert_eq!(cfg.variant(), Some(Variant::B4));
        assert_eq!((cfg.chain.burn_in, cfg.chain.keep, cfg.chain.thin), (10, 20, 2));
        assert_eq!(cfg.priors.b, 0.5);
        assert_eq!(cfg.rng_seed, 9);
        assert_eq!(parse_config(&format_config(&cfg), "x").unwrap(), cfg);
    }

    #[test]
    fn config_errors() {
        let e = parse_config("variant = Q7\n", "cfg").unwrap_err().to_string();
        assert!(e.contains("cfg:1") && e.contains("A1, A2, B1"), "{e}");
        let e = parse_config("\nfoo = 1\n", "cfg").unwrap_err().to_string();
        assert!(e.contains("cfg:2: unknown key 'foo'"), "{e}");
    }

    #[test]
    fn make_use_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ind: Vec<String> = vec!["i1".into(), "i2".into()];
        let com: Vec<String> = vec!["c1".into(), "c2".into()];
        let make = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 2.0, 4.0]);
        let use_m = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 0.0]);
        write_labeled_matrix(&dir.path().join("make.csv"), "industry_id", &ind, &com, &make).unwrap();
        write_labeled_matrix(&dir.path().join("use.csv"), "commodity_id", &com, &ind, &use_m).unwrap();
        fs::write(
            dir.path().join(VINTAGE_MANIFEST),
            "vintage,make_file,use_file,cutover\n1997,make.csv,use.csv,\n",
        )
        .unwrap();
        let (tables, cut) = read_vintage_manifest(&dir.path().join(VINTAGE_MANIFEST)).unwrap();
        assert!(cut.is_empty());
        assert_eq!(tables[0].make, make);
        assert_eq!(tables[0].use_table, use_m);
    }

    #[test]
    fn shocks_and_index() {
        let dir = tempfile::tempdir().unwrap();
        let s = dir.path().join("s.csv");
        fs::write(&s, "date,ff_pre,ff_post,days_in_month,day_of_meeting\n2001-01-03,6.0,5.5,31,3\n").unwrap();
        let v = read_shocks(&s).unwrap();
        assert_eq!(v[0].1.days_in_month, 31);
        let ix = dir.path().join("i.csv");
        fs::write(&ix, "date,value\n2001-01-03,1.5\n2001-01-04,2.5\n").unwrap();
        assert_eq!(read_index(&ix).unwrap().1, vec![1.5, 2.5]);
    }
}
