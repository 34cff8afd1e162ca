//! Flow counters, per-run summaries, replication averaging and CSV export.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::channel::Rat;
use crate::traffic::DropCause;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("replications disagree on the sweep point: {0}")]
    MixedSweepPoints(String),
    #[error("no results to aggregate or export")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowStats {
    pub flow_id: usize,
    pub tx_packets: u64,
    pub rx_packets: u64,
    pub rx_bytes: u64,
    /// Bytes received inside the measurement window, whatever their creation time.
    pub window_rx_bytes: u64,
    pub delay_sum_s: f64,
    pub drops: BTreeMap<DropCause, u64>,
    /// Still queued when the run was cut off.
    pub in_flight: u64,
}

impl FlowStats {
    pub fn new(flow_id: usize) -> Self {
        FlowStats {
            flow_id,
            ..Default::default()
        }
    }

    pub fn record_created(&mut self) {
        self.tx_packets += 1;
    }

    pub fn record_delivery(&mut self, size: u32, delay_s: f64) {
        self.rx_packets += 1;
        self.rx_bytes += u64::from(size);
        self.delay_sum_s += delay_s;
    }

    pub fn record_window_bytes(&mut self, size: u32) {
        self.window_rx_bytes += u64::from(size);
    }

    pub fn record_drop(&mut self, cause: DropCause) {
        *self.drops.entry(cause).or_default() += 1;
    }

    pub fn dropped(&self, cause: DropCause) -> u64 {
        self.drops.get(&cause).copied().unwrap_or(0)
    }

    pub fn total_dropped(&self) -> u64 {
        self.drops.values().sum()
    }

    /// created = delivered + drops + in_flight
    pub fn is_conserved(&self) -> bool {
        self.tx_packets == self.rx_packets + self.total_dropped() + self.in_flight
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSummary {
    pub throughput_bps: f64,
    pub loss: f64,
    pub mean_delay_s: Option<f64>,
}

pub fn finalize(stats: &FlowStats, duration_s: f64) -> FlowSummary {
    let throughput_bps = stats.window_rx_bytes as f64 * 8.0 / duration_s;
    let loss = if stats.tx_packets == 0 {
        0.0
    } else {
        1.0 - stats.rx_packets as f64 / stats.tx_packets as f64
    };
    let mean_delay_s = (stats.rx_packets > 0).then(|| stats.delay_sum_s / stats.rx_packets as f64);
    FlowSummary {
        throughput_bps,
        loss,
        mean_delay_s,
    }
}

/// Cell-wide view: throughput summed over flows, loss and delay pooled
/// over packets.
pub fn finalize_all(flows: &[FlowStats], duration_s: f64) -> FlowSummary {
    let mut total = FlowStats::new(usize::MAX);
    for f in flows {
        total.tx_packets += f.tx_packets;
        total.rx_packets += f.rx_packets;
        total.rx_bytes += f.rx_bytes;
        total.window_rx_bytes += f.window_rx_bytes;
        total.delay_sum_s += f.delay_sum_s;
    }
    finalize(&total, duration_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVariable {
    UeCount,
    DataVolumeMbps,
    SpeedKmh,
    StartDistanceM,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVariable::UeCount => "ue_count",
            SweepVariable::DataVolumeMbps => "data_volume_mbps",
            SweepVariable::SpeedKmh => "speed_kmh",
            SweepVariable::StartDistanceM => "start_distance_m",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "ue_count" => Some(SweepVariable::UeCount),
            "data_volume_mbps" => Some(SweepVariable::DataVolumeMbps),
            "speed_kmh" => Some(SweepVariable::SpeedKmh),
            "start_distance_m" => Some(SweepVariable::StartDistanceM),
            _ => None,
        }
    }
}

/// Outcome of one (RAT, sweep point, replication) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub scenario: String,
    pub rat: Rat,
    pub sweep_variable: SweepVariable,
    pub sweep_index: usize,
    pub sweep_value: f64,
    pub ue_count: usize,
    pub offered_mbps_per_ue: f64,
    pub speed_kmh: f64,
    pub replication: u32,
    pub seed: u64,
    pub flows: Vec<FlowStats>,
    pub throughput_bps: f64,
    pub loss: f64,
    pub mean_delay_s: Option<f64>,
}

/// Replication mean and sample standard deviation at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub scenario: String,
    pub rat: Rat,
    pub sweep_variable: SweepVariable,
    pub sweep_index: usize,
    pub sweep_value: f64,
    pub ue_count: usize,
    pub offered_mbps_per_ue: f64,
    pub speed_kmh: f64,
    pub replications: usize,
    pub seed_base: u64,
    pub throughput_bps: f64,
    pub throughput_std_bps: f64,
    pub loss: f64,
    pub loss_std: f64,
    pub mean_delay_s: Option<f64>,
    pub delay_std_s: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn aggregate_replications(results: &[RunResult], seed_base: u64) -> Result<AggregateResult, MetricsError> {
    let first = results.first().ok_or(MetricsError::Empty)?;
    for r in results {
        if r.scenario != first.scenario
            || r.rat != first.rat
            || r.sweep_variable != first.sweep_variable
            || r.sweep_index != first.sweep_index
            || r.sweep_value.to_bits() != first.sweep_value.to_bits()
        {
            return Err(MetricsError::MixedSweepPoints(format!(
                "{}/{}/{}={} vs {}/{}/{}={}",
                first.scenario,
                first.rat,
                first.sweep_variable.as_str(),
                first.sweep_value,
                r.scenario,
                r.rat,
                r.sweep_variable.as_str(),
                r.sweep_value
            )));
        }
    }
    // canonical order so the floating-point sums do not depend on arrival order
    let mut sorted: Vec<&RunResult> = results.iter().collect();
    sorted.sort_by_key(|r| (r.replication, r.seed));

    let thr: Vec<f64> = sorted.iter().map(|r| r.throughput_bps).collect();
    let loss: Vec<f64> = sorted.iter().map(|r| r.loss).collect();
    let delay: Vec<f64> = sorted.iter().filter_map(|r| r.mean_delay_s).collect();
    let (throughput_bps, throughput_std_bps) = mean_std(&thr);
    let (loss, loss_std) = mean_std(&loss);
    let (mean_delay_s, delay_std_s) = if delay.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&delay);
        (Some(m), Some(s))
    };
    Ok(AggregateResult {
        scenario: first.scenario.clone(),
        rat: first.rat,
        sweep_variable: first.sweep_variable,
        sweep_index: first.sweep_index,
        sweep_value: first.sweep_value,
        ue_count: first.ue_count,
        offered_mbps_per_ue: first.offered_mbps_per_ue,
        speed_kmh: first.speed_kmh,
        replications: results.len(),
        seed_base,
        throughput_bps,
        throughput_std_bps,
        loss,
        loss_std,
        mean_delay_s,
        delay_std_s,
    })
}

pub const CSV_HEADER: &str = "scenario,rat,ue_count,offered_mbps_per_ue,speed_kmh,replications,throughput_mbps,loss_rate,mean_delay_ms,delay_stddev_ms,seed_base";

fn opt(v: Option<f64>, scale: f64) -> String {
    v.map(|x| format!("{:.6}", x * scale)).unwrap_or_default()
}

pub fn render_csv(results: &[AggregateResult]) -> String {
    let mut rows: Vec<&AggregateResult> = results.iter().collect();
    rows.sort_by(|a, b| {
        a.rat
            .cmp(&b.rat)
            .then(a.sweep_value.total_cmp(&b.sweep_value))
            .then(a.sweep_index.cmp(&b.sweep_index))
    });
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{:.6},{},{},{}\n",
            r.scenario,
            r.rat,
            r.ue_count,
            r.offered_mbps_per_ue,
            r.speed_kmh,
            r.replications,
            r.throughput_bps / 1e6,
            r.loss,
            opt(r.mean_delay_s, 1e3),
            opt(r.delay_std_s, 1e3),
            r.seed_base
        ));
    }
    out
}

pub fn export_csv(results: &[AggregateResult], path: &Path) -> Result<(), MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::Empty);
    }
    fs::write(path, render_csv(results)).map_err(|source| MetricsError::Write {
        path: path.to_path_buf(),
        source,
    })
}
