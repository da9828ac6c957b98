//! Network matrices from make and use tables.
//!
//! `share = column-normalized make`, `revenue = share * use`, and
//! `w_ij = revenue_ij / sum_c use_cj`, with rows finally rescaled to sum to one.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::data_model::{open_start, WeightEntry, WeightSequence};

#[derive(Debug, Error, PartialEq)]
pub enum WeightsError {
    #[error("commodity {0} has zero total production in the make table")]
    ZeroCommodity(String),
    #[error("industry {0} has zero total use of commodities")]
    ZeroUse(String),
    #[error("industry {0} has zero inputs")]
    ZeroInputs(String),
    #[error("negative or non-finite entry in {table} table at ({row}, {col})")]
    BadEntry {
        table: &'static str,
        row: usize,
        col: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("industries differ between vintages {a} and {b}: {diff:?}")]
    IndustryMismatch {
        a: String,
        b: String,
        diff: Vec<String>,
    },
    #[error("{0}")]
    Stitch(String),
}

/// Make (industry x commodity) and use (commodity x industry) tables of one vintage.
#[derive(Debug, Clone, PartialEq)]
pub struct IoTables {
    pub make: DMatrix<f64>,
    pub use_table: DMatrix<f64>,
    pub industry_ids: Vec<String>,
    pub commodity_ids: Vec<String>,
    pub vintage: String,
}

impl IoTables {
    pub fn check(&self) -> Result<(), WeightsError> {
        let (n, c) = (self.industry_ids.len(), self.commodity_ids.len());
        if self.make.shape() != (n, c) {
            return Err(WeightsError::Dimension(format!(
                "make table is {:?}, expected ({n}, {c})",
                self.make.shape()
            )));
        }
        if self.use_table.shape() != (c, n) {
            return Err(WeightsError::Dimension(format!(
                "use table is {:?}, expected ({c}, {n})",
                self.use_table.shape()
            )));
        }
        for (table, m) in [("make", &self.make), ("use", &self.use_table)] {
            for (k, v) in m.iter().enumerate() {
                if !(v.is_finite() && *v >= 0.0) {
                    let (row, col) = (k % m.nrows(), k / m.nrows());
                    return Err(WeightsError::BadEntry { table, row, col });
                }
            }
        }
        Ok(())
    }
}

/// A finished network matrix together with the row sums it had before the final
/// renormalization.
#[derive(Debug, Clone, PartialEq)]
pub struct InputShares {
    pub weights: DMatrix<f64>,
    pub raw_row_sums: DVector<f64>,
}

/// Column-normalizes the make table: the share of each commodity produced by each industry.
pub fn market_shares(tables: &IoTables) -> Result<DMatrix<f64>, WeightsError> {
    tables.check()?;
    let mut shares = tables.make.clone();
    for (c, mut col) in shares.column_iter_mut().enumerate() {
        let s: f64 = col.sum();
        if s <= 0.0 {
            return Err(WeightsError::ZeroCommodity(tables.commodity_ids[c].clone()));
        }
        col /= s;
    }
    Ok(shares)
}

/// Dollar flows between industries, `shares * use`.
pub fn revenue_matrix(
    shares: &DMatrix<f64>,
    use_table: &DMatrix<f64>,
) -> Result<DMatrix<f64>, WeightsError> {
    if shares.ncols() != use_table.nrows() {
        return Err(WeightsError::Dimension(format!(
            "shares have {} commodities, use table has {}",
            shares.ncols(),
            use_table.nrows()
        )));
    }
    Ok(shares * use_table)
}

/// `w_ij = rev_ij / sum_c use_cj`, followed by row renormalization.
pub fn input_share_weights(
    rev: &DMatrix<f64>,
    use_table: &DMatrix<f64>,
    industry_ids: &[String],
) -> Result<InputShares, WeightsError> {
    let n = rev.nrows();
    if rev.ncols() != n || use_table.ncols() != n || industry_ids.len() != n {
        return Err(WeightsError::Dimension(format!(
            "revenue {:?}, use {:?}, {} industry ids",
            rev.shape(),
            use_table.shape(),
            industry_ids.len()
        )));
    }
    let col_use: Vec<f64> = use_table.column_iter().map(|c| c.sum()).collect();
    if let Some(j) = col_use.iter().position(|&s| s <= 0.0) {
        return Err(WeightsError::ZeroUse(industry_ids[j].clone()));
    }
    let mut w = DMatrix::from_fn(n, n, |i, j| rev[(i, j)] / col_use[j]);
    let mut raw = DVector::zeros(n);
    for i in 0..n {
        let s: f64 = w.row(i).sum();
        if s <= 0.0 {
            return Err(WeightsError::ZeroInputs(industry_ids[i].clone()));
        }
        raw[i] = s;
        w.row_mut(i).scale_mut(1.0 / s);
    }
    Ok(InputShares {
        weights: w,
        raw_row_sums: raw,
    })
}

/// Full make/use to network-matrix chain for one vintage.
pub fn build_weights(tables: &IoTables) -> Result<InputShares, WeightsError> {
    let shares = market_shares(tables)?;
    let rev = revenue_matrix(&shares, &tables.use_table)?;
    input_share_weights(&rev, &tables.use_table, &tables.industry_ids)
}

/// Stitches dated vintages into a piecewise-constant weight sequence.
///
/// `cutovers[k]` is the first date on which vintage `k + 1` applies; the first vintage
/// applies from the start of the sample. Also returns the pre-normalization row sums
/// of each vintage.
pub fn stitch(
    vintages: &[IoTables],
    cutovers: &[NaiveDate],
) -> Result<(WeightSequence, Vec<InputShares>), WeightsError> {
    let first = vintages
        .first()
        .ok_or_else(|| WeightsError::Stitch("no vintages given".into()))?;
    if cutovers.len() + 1 != vintages.len() {
        return Err(WeightsError::Stitch(format!(
            "{} vintages need {} cutover dates, got {}",
            vintages.len(),
            vintages.len() - 1,
            cutovers.len()
        )));
    }
    if let Some(w) = cutovers.windows(2).find(|w| w[1] <= w[0]) {
        return Err(WeightsError::Stitch(format!(
            "overlapping windows: cutover {} does not follow {}",
            w[1], w[0]
        )));
    }
    let reference: BTreeSet<&String> = first.industry_ids.iter().collect();
    for v in &vintages[1..] {
        let other: BTreeSet<&String> = v.industry_ids.iter().collect();
        let diff: Vec<String> = reference
            .symmetric_difference(&other)
            .map(|s| s.to_string())
            .collect();
        if !diff.is_empty() {
            return Err(WeightsError::IndustryMismatch {
                a: first.vintage.clone(),
                b: v.vintage.clone(),
                diff,
            });
        }
    }

    let built = vintages
        .iter()
        .map(|v| build_weights(&align(v, &first.industry_ids)))
        .collect::<Result<Vec<_>, _>>()?;
    let dates = std::iter::once(open_start()).chain(cutovers.iter().copied());
    let entries = dates
        .zip(&built)
        .map(|(effective_from, b)| WeightEntry {
            effective_from,
            matrix: b.weights.clone(),
        })
        .collect();
    Ok((
        WeightSequence {
            entries,
            unit_ids: first.industry_ids.clone(),
        },
        built,
    ))
}

/// Reorders a vintage's industries to `order` (same set, possibly different order).
fn align(t: &IoTables, order: &[String]) -> IoTables {
    if t.industry_ids == order {
        return t.clone();
    }
    let pos: Vec<usize> = order
        .iter()
        .map(|id| t.industry_ids.iter().position(|x| x == id).unwrap())
        .collect();
    let c = t.commodity_ids.len();
    IoTables {
        make: DMatrix::from_fn(order.len(), c, |i, k| t.make[(pos[i], k)]),
        use_table: DMatrix::from_fn(c, order.len(), |k, j| t.use_table[(k, pos[j])]),
        industry_ids: order.to_vec(),
        commodity_ids: t.commodity_ids.clone(),
        vintage: t.vintage.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ids(n: usize, p: &str) -> Vec<String> {
        (0..n).map(|i| format!("{p}{i}")).collect()
    }

    fn tables(make: DMatrix<f64>, use_table: DMatrix<f64>) -> IoTables {
        IoTables {
            industry_ids: ids(make.nrows(), "i"),
            commodity_ids: ids(make.ncols(), "c"),
            make,
            use_table,
            vintage: "1997".into(),
        }
    }

    #[test]
    fn shares_by_hand() {
        let t = tables(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 2.0, 4.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 0.0]),
        );
        let s = market_shares(&t).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.5, 1.0]));
    }

    #[test]
    fn identity_make_gives_identity_shares() {
        let t = tables(DMatrix::identity(2, 2), DMatrix::identity(2, 2));
        assert_eq!(market_shares(&t).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn zero_commodity_rejected() {
        let t = tables(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]),
            DMatrix::identity(2, 2),
        );
        assert_eq!(
            market_shares(&t).unwrap_err(),
            WeightsError::ZeroCommodity("c1".into())
        );
    }

    #[test]
    fn revenue_by_hand() {
        let use_t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            revenue_matrix(&DMatrix::identity(2, 2), &use_t).unwrap(),
            use_t
        );
        let shares = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.5, 1.0]);
        let use_t = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 0.0]);
        assert_eq!(
            revenue_matrix(&shares, &use_t).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 3.0, 1.0])
        );
        assert_eq!(
            revenue_matrix(&shares, &DMatrix::zeros(2, 2)).unwrap(),
            DMatrix::zeros(2, 2)
        );
        assert!(revenue_matrix(&shares, &DMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn input_shares_by_hand() {
        let rev = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 3.0, 1.0]);
        let use_t = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 0.0]);
        let out = input_share_weights(&rev, &use_t, &ids(2, "i")).unwrap();
        assert_relative_eq!(out.raw_row_sums, DVector::from_vec(vec![0.75, 1.25]));
        let expect = DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, 2.0 / 3.0, 0.6, 0.4]);
        assert_relative_eq!(out.weights, expect, epsilon = 1e-15);
    }

    #[test]
    fn self_input_only_gives_identity() {
        let rev = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 5.0]));
        let use_t = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 0.0, 3.0]);
        let out = input_share_weights(&rev, &use_t, &ids(2, "i")).unwrap();
        assert_eq!(out.weights, DMatrix::identity(2, 2));
    }

    #[test]
    fn zero_input_row_rejected() {
        let rev = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 1.0]);
        let use_t = DMatrix::from_element(2, 2, 1.0);
        let err = input_share_weights(&rev, &use_t, &ids(2, "i")).unwrap_err();
        assert_eq!(err.to_string(), "industry i0 has zero inputs");
    }

    fn two_vintages() -> Vec<IoTables> {
        let a = tables(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 2.0, 4.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 0.0]),
        );
        let mut b = tables(
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 3.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 1.0]),
        );
        b.vintage = "2002".into();
        vec![a, b]
    }

    #[test]
    fn stitch_switches_at_cutover() {
        let cut = NaiveDate::from_ymd_opt(2002, 1, 30).unwrap();
        let v = two_vintages();
        let (seq, _) = stitch(&v, &[cut]).unwrap();
        seq.validate().unwrap();
        let before = cut - chrono::Duration::days(1);
        assert_eq!(seq.lookup(before), Some(0));
        assert_eq!(seq.lookup(cut), Some(1));
        assert_eq!(seq.entries[1].matrix, build_weights(&v[1]).unwrap().weights);
    }

    #[test]
    fn single_vintage_is_constant() {
        let v = two_vintages();
        let (seq, _) = stitch(&v[..1], &[]).unwrap();
        assert_eq!(seq.entries.len(), 1);
        let d = NaiveDate::from_ymd_opt(2008, 12, 16).unwrap();
        assert_eq!(seq.lookup(d), Some(0));
    }

    #[test]
    fn mismatched_industries_listed() {
        let mut v = two_vintages();
        v[1].industry_ids = vec!["i0".into(), "x9".into()];
        let cut = NaiveDate::from_ymd_opt(2002, 1, 30).unwrap();
        match stitch(&v, &[cut]).unwrap_err() {
            WeightsError::IndustryMismatch { diff, .. } => {
                assert_eq!(diff, vec!["i1".to_string(), "x9".to_string()])
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn vintage_order_is_aligned() {
        let mut v = two_vintages();
        let plain = build_weights(&v[1]).unwrap().weights;
        // same tables with the industries listed in reverse order
        let b = &v[1];
        v[1] = IoTables {
            make: DMatrix::from_fn(2, 2, |i, k| b.make[(1 - i, k)]),
            use_table: DMatrix::from_fn(2, 2, |k, j| b.use_table[(k, 1 - j)]),
            industry_ids: vec!["i1".into(), "i0".into()],
            ..b.clone()
        };
        let cut = NaiveDate::from_ymd_opt(2002, 1, 30).unwrap();
        let (seq, _) = stitch(&v, &[cut]).unwrap();
        assert_relative_eq!(seq.entries[1].matrix, plain, epsilon = 1e-15);
    }

    fn positive_tables(n: usize, c: usize) -> impl Strategy<Value = IoTables> {
        (
            proptest::collection::vec(0.1f64..10.0, n * c),
            proptest::collection::vec(0.1f64..10.0, n * c),
        )
            .prop_map(move |(mk, us)| {
                tables(
                    DMatrix::from_vec(n, c, mk),
                    DMatrix::from_vec(c, n, us),
                )
            })
    }

    proptest! {
        #[test]
        fn shares_are_column_stochastic(t in positive_tables(4, 3)) {
            let s = market_shares(&t).unwrap();
            for col in s.column_iter() {
                prop_assert!((col.sum() - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn output_passes_validation(t in positive_tables(5, 4)) {
            let w = build_weights(&t).unwrap().weights;
            WeightSequence::constant(t.industry_ids.clone(), w).validate().unwrap();
        }

        #[test]
        fn scale_invariant(t in positive_tables(3, 3), k in 0.01f64..100.0) {
            let a = build_weights(&t).unwrap().weights;
            let scaled = IoTables { make: &t.make * k, use_table: &t.use_table * k, ..t.clone() };
            let b = build_weights(&scaled).unwrap().weights;
            prop_assert!((a - b).amax() < 1e-12);
        }

        #[test]
        fn deterministic(t in positive_tables(3, 2)) {
            let a = build_weights(&t).unwrap().weights;
            let b = build_weights(&t.clone()).unwrap().weights;
            prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
