use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::format_float;
use crate::kernels::{BandwidthMatrix, KernelSpec};
use crate::rng::{derive_seed, Stream};
use crate::smoothing::SpatialDataset;
use crate::trend::TrendModel;
use crate::variography::VariogramFamily;

use super::bootstrap::{NullFit, TestConfig};
use super::quadrature::{QuadratureGrid, WeightFunction};
use super::statistic::StatisticOperator;

/// One bandwidth of a significance trace; `p_value` is `None` when the test
/// failed at that bandwidth and `reason` says why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub bandwidth: BandwidthMatrix,
    pub t_n: Option<f64>,
    pub p_value: Option<f64>,
    pub reason: Option<String>,
}

impl TraceEntry {
    /// Seed used for entry `j` of a trace run with `seed`.
    pub fn seed_for(seed: u64, j: usize) -> u64 {
        derive_seed(seed, Stream::Trace, j as u64)
    }
}

/// p-values across a bandwidth grid, one bootstrap test per bandwidth with
/// seed [`TraceEntry::seed_for`]. The null fit is shared; failures at a
/// single bandwidth are reported in the entry.
#[allow(clippy::too_many_arguments)]
pub fn significance_trace(
    data: &SpatialDataset,
    model: &TrendModel,
    family: VariogramFamily,
    k: &KernelSpec,
    grid: &[BandwidthMatrix],
    w: &WeightFunction,
    q: &QuadratureGrid,
    config: &TestConfig,
    seed: u64,
) -> Result<Vec<TraceEntry>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("bandwidth grid is empty".into()));
    }
    let null = NullFit::new(data, model, family, config)?;
    let entries = grid
        .iter()
        .enumerate()
        .map(|(j, h)| {
            let outcome = StatisticOperator::new(data, k, h, w, q)
                .and_then(|op| null.test(std::slice::from_ref(&op), TraceEntry::seed_for(seed, j)))
                .map(|mut r| r.remove(0));
            match outcome {
                Ok(r) => TraceEntry {
                    bandwidth: h.clone(),
                    t_n: Some(r.t_n),
                    p_value: Some(r.p_value),
                    reason: None,
                },
                Err(e) => TraceEntry {
                    bandwidth: h.clone(),
                    t_n: None,
                    p_value: None,
                    reason: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(entries)
}

/// CSV with columns `h1, ..., hd, p_value, reason`; failed entries carry
/// `NA` as p-value.
pub fn write_trace_csv<W: Write>(entries: &[TraceEntry], out: W) -> Result<()> {
    let dim = entries.first().map_or(2, |e| e.bandwidth.dim());
    let mut wtr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=dim).map(|i| format!("h{i}")).collect();
    header.extend(["p_value".to_string(), "reason".to_string()]);
    wtr.write_record(&header).map_err(csv_err)?;
    for e in entries {
        let mut rec: Vec<String> = e.bandwidth.diagonal().iter().map(|h| format_float(*h)).collect();
        rec.push(e.p_value.map_or_else(|| "NA".to_string(), format_float));
        rec.push(e.reason.clone().unwrap_or_default());
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
