//! Sweep orchestration: expands a configuration into (RAT, sweep point,
//! replication) runs, executes them and aggregates per sweep point.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::channel::Rat;
use crate::config::{ConfigError, ScenarioConfig};
use crate::engine::mix64;
use crate::metrics::{aggregate_replications, finalize_all, AggregateResult, MetricsError, RunResult, SweepVariable};
use crate::mobility::Placement;
use crate::sim::{simulate_cell, CellSpec, SimError};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run failed at {rat} {variable}={value} replication {replication}: {source}")]
    RunFailed {
        rat: Rat,
        variable: &'static str,
        value: f64,
        replication: u32,
        #[source]
        source: SimError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("cannot create trace file {path}: {source}")]
    Trace {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
}

/// One value of the swept variable with every per-run input resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub value: f64,
    pub ue_count: usize,
    pub rate_mbps: f64,
    pub speed_kmh: f64,
    pub placement: Placement,
}

pub fn sweep_points(cfg: &ScenarioConfig) -> Vec<SweepPoint> {
    cfg.sweep_values
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            let mut p = SweepPoint {
                index,
                value,
                ue_count: cfg.ue_count,
                rate_mbps: cfg.traffic.data_volume_mbps,
                speed_kmh: cfg.mobility.speed_kmh,
                placement: cfg.mobility.placement.clone(),
            };
            match cfg.sweep_variable {
                SweepVariable::UeCount => p.ue_count = value as usize,
                SweepVariable::DataVolumeMbps => p.rate_mbps = value,
                SweepVariable::SpeedKmh => p.speed_kmh = value,
                SweepVariable::StartDistanceM => p.placement = Placement::Radii(vec![value]),
            }
            p
        })
        .collect()
}

/// Seed of replication `rep` at sweep point `sweep_index`: `seed_base + rep`,
/// decorrelated across sweep points. Both RATs share it.
pub fn run_seed(seed_base: u64, sweep_index: usize, rep: u32) -> u64 {
    mix64(mix64(seed_base.wrapping_add(u64::from(rep))) ^ mix64(sweep_index as u64).rotate_left(17))
}

/// Inputs of one run.
pub fn cell_spec(cfg: &ScenarioConfig, rat: Rat, point: &SweepPoint, rep: u32) -> Result<CellSpec, SimError> {
    let mut spec = CellSpec::from_params(cfg.rat_params(rat))?;
    let m = &cfg.mobility;
    spec.ues = point
        .placement
        .layout(point.ue_count, point.speed_kmh, m.corridor_min_m, m.corridor_max_m);
    spec.speed_kmh = point.speed_kmh;
    spec.rate_bps = point.rate_mbps * 1e6;
    spec.packet_size = cfg.traffic.packet_size_bytes;
    spec.queue_capacity = cfg.traffic.queue_capacity_pkts;
    spec.app_start_s = cfg.traffic.app_start_s;
    spec.app_stop_s = cfg.app_stop_s();
    spec.warmup_s = cfg.warmup_s;
    spec.duration_s = cfg.duration_s;
    spec.drain_limit_s = cfg.drain_limit_s;
    spec.core_latency_s = cfg.traffic.core_latency_ms / 1e3;
    spec.seed = run_seed(cfg.seed_base, point.index, rep);
    Ok(spec)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global rayon pool, `Some(1)` runs serially.
    pub jobs: Option<usize>,
    /// Directory for per-run event traces.
    pub trace_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub runs: Vec<RunResult>,
    pub aggregates: Vec<AggregateResult>,
}

fn trace_path(dir: &Path, cfg: &ScenarioConfig, rat: Rat, point: &SweepPoint, rep: u32) -> PathBuf {
    dir.join(format!("{}_{}_{}_{}.trace", cfg.scenario_name(), rat, point.value, rep))
}

fn execute(cfg: &ScenarioConfig, rat: Rat, point: &SweepPoint, rep: u32, opts: &RunOptions) -> Result<RunResult, RunnerError> {
    let fail = |source: SimError| RunnerError::RunFailed {
        rat,
        variable: cfg.sweep_variable.as_str(),
        value: point.value,
        replication: rep,
        source,
    };
    let spec = cell_spec(cfg, rat, point, rep).map_err(fail)?;
    let seed = spec.seed;
    let trace: Option<Box<dyn Write + Send>> = match &opts.trace_dir {
        Some(dir) => {
            let path = trace_path(dir, cfg, rat, point, rep);
            let file = File::create(&path).map_err(|source| RunnerError::Trace { path, source })?;
            Some(Box::new(BufWriter::new(file)))
        }
        None => None,
    };
    let out = simulate_cell(spec, trace).map_err(fail)?;
    let summary = finalize_all(&out.flows, out.window_s);
    Ok(RunResult {
        scenario: cfg.scenario_name().to_string(),
        rat,
        sweep_variable: cfg.sweep_variable,
        sweep_index: point.index,
        sweep_value: point.value,
        ue_count: point.ue_count,
        offered_mbps_per_ue: point.rate_mbps,
        speed_kmh: point.speed_kmh,
        replication: rep,
        seed,
        flows: out.flows,
        throughput_bps: summary.throughput_bps,
        loss: summary.loss,
        mean_delay_s: summary.mean_delay_s,
    })
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput, RunnerError> {
    run_scenario_with(cfg, &RunOptions::default())
}

pub fn run_scenario_with(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioOutput, RunnerError> {
    cfg.validate()?;
    if let Some(dir) = &opts.trace_dir {
        fs::create_dir_all(dir).map_err(|source| RunnerError::Trace {
            path: dir.clone(),
            source,
        })?;
    }
    let points = sweep_points(cfg);
    let mut rats = cfg.rats.clone();
    rats.sort();
    let jobs: Vec<(Rat, &SweepPoint, u32)> = rats
        .iter()
        .flat_map(|&rat| {
            points
                .iter()
                .flat_map(move |p| (0..cfg.replications).map(move |rep| (rat, p, rep)))
        })
        .collect();

    let work = || -> Vec<Result<RunResult, RunnerError>> {
        jobs.par_iter()
            .map(|(rat, point, rep)| execute(cfg, *rat, point, *rep, opts))
            .collect()
    };
    let results = match opts.jobs {
        Some(1) => jobs
            .iter()
            .map(|(rat, point, rep)| execute(cfg, *rat, point, *rep, opts))
            .collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RunnerError::Pool(e.to_string()))?
            .install(work),
        None => work(),
    };
    // results keep job order, so the first error is the earliest sweep point
    let runs: Vec<RunResult> = results.into_iter().collect::<Result<_, _>>()?;

    let per_point = cfg.replications as usize;
    let aggregates = runs
        .chunks(per_point)
        .map(|chunk| aggregate_replications(chunk, cfg.seed_base))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScenarioOutput { runs, aggregates })
}

/// Modelling assumptions echoed next to every result file.
pub const MODEL_NOTES: &[&str] = &[
    "data_volume_mbps is per UE; throughput is the cell aggregate",
    "LTE bandwidth interpreted as 25 resource blocks = 5 MHz",
    "transmit powers, antenna gains and noise figures are defaults, not measured values",
    "mmWave LOS coefficients alpha/beta/sigma default to a 28 GHz LOS fit",
    "NR scheduler modelled as slot-level round robin (one UE per slot)",
    "RLC in unacknowledged mode: HARQ is the only retransmission layer",
    "velocity degradation is an empirical outage model; outage state and shadowing are redrawn every beam refresh",
    "link adaptation does not see the velocity penalty; only HARQ decoding does",
    "scenario 3 UEs start evenly over 20-100 m and patrol radially between corridor_min_m and corridor_max_m",
    "CBR stream phases are staggered evenly across one packet interval",
    "packets created before warmup_s are excluded from loss and delay counters",
    "throughput counts bytes received between max(warmup_s, app_start_s) and app_stop_s",
];

pub fn metadata(cfg: &ScenarioConfig) -> String {
    let mut s = String::from("# effective configuration\n");
    s.push_str(&cfg.render());
    s.push_str("# model notes\n");
    for note in MODEL_NOTES {
        s.push_str("# - ");
        s.push_str(note);
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, MobilitySweep, Preset};

    #[test]
    fn sweep_expansion() {
        let cfg = ScenarioConfig::preset(Preset::Scenario2, MobilitySweep::Speed);
        let pts = sweep_points(&cfg);
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[4].rate_mbps, 5.0);
        assert_eq!(pts[4].ue_count, 8);

        let cfg = ScenarioConfig::preset(Preset::Scenario3, MobilitySweep::StartDistance);
        let pts = sweep_points(&cfg);
        assert_eq!(pts[2].placement, Placement::Radii(vec![60.0]));
    }

    #[test]
    fn seeds_are_distinct_across_points_and_reps() {
        let mut seen = std::collections::HashSet::new();
        for idx in 0..20 {
            for rep in 0..10 {
                assert!(seen.insert(run_seed(7, idx, rep)));
            }
        }
        assert_eq!(run_seed(7, 3, 2), run_seed(7, 3, 2));
    }

    #[test]
    fn small_sweep_cardinality() {
        let cfg = parse_config(
            "preset = scenario1\nrats = lte\nreplications = 1\nduration_s = 2\nsweep_values = 2,4",
        )
        .unwrap();
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.runs.len(), 2);
        assert_eq!(out.aggregates.len(), 2);
        assert_eq!(out.aggregates[1].ue_count, 4);
    }

    #[test]
    fn traces_are_written_per_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("rats = nr\nreplications = 1\nduration_s = 1.5\nue_count = 2\nsweep_values = 2").unwrap();
        let opts = RunOptions {
            jobs: Some(1),
            trace_dir: Some(dir.path().to_path_buf()),
        };
        run_scenario_with(&cfg, &opts).unwrap();
        let text = fs::read_to_string(dir.path().join("custom_nr_2_0.trace")).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first.split('\t').count(), 4);
        assert!(text.contains("\tdelivery\t"));
    }

    #[test]
    fn metadata_echoes_config() {
        let cfg = ScenarioConfig::default();
        let meta = metadata(&cfg);
        // the echoed block is itself a valid config
        assert_eq!(parse_config(&meta).unwrap(), cfg);
    }
}
