//! Estimators for the privatized reports produced by the channels module.

mod gaussian;
mod sparse;
mod subsample;
mod two_phase;
mod yebarg;

pub use gaussian::gaussian_mean_estimate;
pub use sparse::{
    combine, f_map, g_map, halve, ps_floor, reduction_probs, rr_invert, sparse_bernoulli_estimate, SparseEstimate,
    SparsePipelineConfig,
};
pub use subsample::{
    estimate_mu_r, mu_r_from_pmf, subsample_krr_estimate, subsample_krr_estimate_known_r, subsample_krr_pipeline,
    MuREstimate, RScale, SubsampleAggregatorState, SubsampleConfig, SubsampleEstimate,
};
pub use two_phase::{group_params, largest_remainder, s_sparse_two_phase_estimate, TwoPhaseConfig, TwoPhaseEstimate};
pub use yebarg::{
    choose_w, yebarg_estimate, yebarg_risk_formula, yebarg_risk_formula_printed, yebarg_tally, AffineEstimatorSpec,
    SubsetTally,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One privatized message in a report stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub node: usize,
    pub phase: u8,
    /// Output symbol as a support set (a single index for index-valued outputs).
    pub symbol: Vec<usize>,
}

/// Parses one JSON record per line; blank lines are skipped.
pub fn parse_reports(text: &str) -> Result<Vec<ReportRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::from(e).context(format!("report line {}", i + 1))))
        .collect()
}

pub fn write_reports(records: &[ReportRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Symbols of the records in `phase`, in node order.
pub fn phase_symbols(records: &[ReportRecord], phase: u8) -> Vec<Vec<usize>> {
    let mut sel: Vec<&ReportRecord> = records.iter().filter(|r| r.phase == phase).collect();
    sel.sort_by_key(|r| r.node);
    sel.into_iter().map(|r| r.symbol.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip() {
        let recs = vec![
            ReportRecord { node: 1, phase: 0, symbol: vec![2] },
            ReportRecord { node: 0, phase: 0, symbol: vec![0] },
            ReportRecord { node: 2, phase: 1, symbol: vec![] },
        ];
        let text = write_reports(&recs).unwrap();
        assert_eq!(parse_reports(&text).unwrap(), recs);
        assert_eq!(phase_symbols(&recs, 0), vec![vec![0], vec![2]]);
        let est = yebarg_estimate(&phase_symbols(&recs, 0), 3, 1, 2f64.ln()).unwrap();
        assert_eq!(est.len(), 3);
        assert!(parse_reports("{bad").is_err());
    }
}
