//! Scenario configuration: presets, the flat `key = value` file format and
//! validation.
//!
//! Lines are `key = value`; `#` starts a comment. Keys are grouped by prefix:
//! top-level run keys, `radio.lte.*` / `radio.nr.*`, `phy.lte.*` /
//! `phy.nr.*`, `traffic.*` and `mobility.*`. A `preset` line expands first,
//! every other line overrides it, and unknown keys are rejected.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::channel::{
    earfcn_direction, earfcn_to_freq_mhz, nr_arfcn_to_freq_mhz, MmWavePathLossParams, RadioConfig, Rat,
    VelocityModel,
};
use crate::metrics::SweepVariable;
use crate::mobility::Placement;
use crate::phy::{slot_duration_s, BlerCurve, HarqProcess, LinkAdaptation};
use crate::traffic::MAX_PACKET_SIZE;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key '{key}' given more than once")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: {key}: {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("invalid configuration:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<FieldIssue>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Scenario1,
    Scenario2,
    Scenario3,
    Custom,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Scenario1 => "scenario1",
            Preset::Scenario2 => "scenario2",
            Preset::Scenario3 => "scenario3",
            Preset::Custom => "custom",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "scenario1" | "1" => Ok(Preset::Scenario1),
            "scenario2" | "2" => Ok(Preset::Scenario2),
            "scenario3" | "3" => Ok(Preset::Scenario3),
            "custom" => Ok(Preset::Custom),
            other => Err(format!("unknown preset '{other}' (scenario1, scenario2, scenario3, custom)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilitySweep {
    Speed,
    StartDistance,
}

impl MobilitySweep {
    fn as_str(self) -> &'static str {
        match self {
            MobilitySweep::Speed => "speed",
            MobilitySweep::StartDistance => "start_distance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerKind {
    ProportionalFair,
    RoundRobin,
}

impl SchedulerKind {
    fn as_str(self) -> &'static str {
        match self {
            SchedulerKind::ProportionalFair => "pf",
            SchedulerKind::RoundRobin => "rr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Carrier {
    FreqMhz(f64),
    Earfcn(u32),
    NrArfcn(u32),
}

impl Carrier {
    pub fn freq_mhz(&self) -> Result<f64, String> {
        match *self {
            Carrier::FreqMhz(f) => Ok(f),
            Carrier::Earfcn(n) => {
                let dir = earfcn_direction(n).ok_or_else(|| format!("EARFCN {n} is not in band 1"))?;
                earfcn_to_freq_mhz(n, dir).map_err(|e| e.to_string())
            }
            Carrier::NrArfcn(n) => nr_arfcn_to_freq_mhz(n).map_err(|e| e.to_string()),
        }
    }
}

/// Everything that differs between the LTE and NR cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RatParams {
    pub rat: Rat,
    pub carrier: Carrier,
    pub bandwidth_mhz: f64,
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub system_loss: f64,
    pub noise_figure_db: f64,
    pub mmwave: MmWavePathLossParams,
    pub velocity: VelocityModel,
    pub beam_refresh_ms: f64,
    pub scs_khz: u32,
    pub rb_count: u32,
    pub scheduler: SchedulerKind,
    pub pf_window: u32,
    pub la: LinkAdaptation,
    pub harq_max_retx: u32,
    pub harq_combining_db: f64,
    pub harq_rtt_ms: f64,
    pub bler: BlerCurve,
}

impl RatParams {
    pub fn lte() -> Self {
        let radio = RadioConfig::lte_default();
        RatParams {
            rat: Rat::Lte,
            carrier: Carrier::Earfcn(18100),
            bandwidth_mhz: radio.bandwidth_hz / 1e6,
            tx_power_dbm: radio.tx_power_dbm,
            tx_gain_dbi: radio.tx_gain_dbi,
            rx_gain_dbi: radio.rx_gain_dbi,
            system_loss: radio.system_loss,
            noise_figure_db: radio.noise_figure_db,
            mmwave: MmWavePathLossParams::default(),
            velocity: VelocityModel::default(),
            beam_refresh_ms: 100.0,
            scs_khz: 15,
            rb_count: 25,
            scheduler: SchedulerKind::ProportionalFair,
            pf_window: 100,
            la: LinkAdaptation::lte_default(),
            harq_max_retx: 3,
            harq_combining_db: 2.0,
            harq_rtt_ms: 8.0,
            bler: BlerCurve::default(),
        }
    }

    pub fn nr() -> Self {
        let radio = RadioConfig::nr_default();
        RatParams {
            rat: Rat::Nr,
            carrier: Carrier::FreqMhz(radio.carrier_freq_hz / 1e6),
            bandwidth_mhz: radio.bandwidth_hz / 1e6,
            tx_power_dbm: radio.tx_power_dbm,
            tx_gain_dbi: radio.tx_gain_dbi,
            rx_gain_dbi: radio.rx_gain_dbi,
            system_loss: radio.system_loss,
            noise_figure_db: radio.noise_figure_db,
            mmwave: radio.mmwave,
            velocity: VelocityModel::default(),
            beam_refresh_ms: 100.0,
            scs_khz: 120,
            rb_count: 66,
            scheduler: SchedulerKind::RoundRobin,
            pf_window: 100,
            la: LinkAdaptation::nr_default(),
            harq_max_retx: 3,
            harq_combining_db: 2.0,
            // four 0.125 ms slots
            harq_rtt_ms: 0.5,
            bler: BlerCurve::default(),
        }
    }

    pub fn harq(&self) -> HarqProcess {
        HarqProcess {
            max_retx: self.harq_max_retx,
            combining_gain_db: self.harq_combining_db,
            rtt_s: self.harq_rtt_ms / 1e3,
        }
    }

    pub fn radio(&self) -> Result<RadioConfig, String> {
        Ok(RadioConfig {
            rat: self.rat,
            carrier_freq_hz: self.carrier.freq_mhz()? * 1e6,
            bandwidth_hz: self.bandwidth_mhz * 1e6,
            tx_power_dbm: self.tx_power_dbm,
            tx_gain_dbi: self.tx_gain_dbi,
            rx_gain_dbi: self.rx_gain_dbi,
            system_loss: self.system_loss,
            noise_figure_db: self.noise_figure_db,
            mmwave: self.mmwave,
        })
    }

    fn entries(&self, out: &mut Vec<(String, String)>) {
        let r = format!("radio.{}.", self.rat);
        let p = format!("phy.{}.", self.rat);
        let mut push = |k: String, v: String| out.push((k, v));
        match self.carrier {
            Carrier::FreqMhz(f) => push(format!("{r}carrier_freq_mhz"), f.to_string()),
            Carrier::Earfcn(n) => push(format!("{r}earfcn"), n.to_string()),
            Carrier::NrArfcn(n) => push(format!("{r}nr_arfcn"), n.to_string()),
        }
        push(format!("{r}bandwidth_mhz"), self.bandwidth_mhz.to_string());
        push(format!("{r}tx_power_dbm"), self.tx_power_dbm.to_string());
        push(format!("{r}tx_gain_dbi"), self.tx_gain_dbi.to_string());
        push(format!("{r}rx_gain_dbi"), self.rx_gain_dbi.to_string());
        push(format!("{r}system_loss"), self.system_loss.to_string());
        push(format!("{r}noise_figure_db"), self.noise_figure_db.to_string());
        push(format!("{r}mmwave_alpha"), self.mmwave.alpha_db.to_string());
        push(format!("{r}mmwave_beta"), self.mmwave.beta.to_string());
        push(format!("{r}mmwave_sigma"), self.mmwave.sigma_db.to_string());
        push(format!("{r}max_range_m"), self.mmwave.max_range_m.to_string());
        push(format!("{r}v_mid_kmh"), self.velocity.v_mid_kmh.to_string());
        push(format!("{r}s_v_kmh"), self.velocity.s_v_kmh.to_string());
        push(format!("{r}outage_db"), self.velocity.outage_db.to_string());
        push(format!("{r}velocity_slope_db_per_kmh"), self.velocity.lte_slope_db_per_kmh.to_string());
        push(format!("{r}beam_refresh_ms"), self.beam_refresh_ms.to_string());
        push(format!("{p}scs_khz"), self.scs_khz.to_string());
        push(format!("{p}rb_count"), self.rb_count.to_string());
        push(format!("{p}scheduler"), self.scheduler.as_str().to_string());
        push(format!("{p}pf_window"), self.pf_window.to_string());
        push(format!("{p}la_overhead"), self.la.overhead.to_string());
        push(format!("{p}la_eff_max"), self.la.eff_max.to_string());
        push(format!("{p}la_snr_floor_db"), self.la.snr_floor_db.to_string());
        push(format!("{p}harq_max_retx"), self.harq_max_retx.to_string());
        push(format!("{p}harq_rtt_ms"), self.harq_rtt_ms.to_string());
        push(format!("{p}harq_combining_db"), self.harq_combining_db.to_string());
        push(format!("{p}bler_threshold_db"), self.bler.threshold_db.to_string());
        push(format!("{p}bler_steepness_db"), self.bler.steepness_db.to_string());
    }

    fn apply_radio(&mut self, key: &str, value: &str) -> Result<bool, String> {
        match key {
            "carrier_freq_mhz" => self.carrier = Carrier::FreqMhz(num(value)?),
            "earfcn" => self.carrier = Carrier::Earfcn(int(value)?),
            "nr_arfcn" => self.carrier = Carrier::NrArfcn(int(value)?),
            "bandwidth_mhz" => self.bandwidth_mhz = num(value)?,
            "tx_power_dbm" => self.tx_power_dbm = num(value)?,
            "tx_gain_dbi" => self.tx_gain_dbi = num(value)?,
            "rx_gain_dbi" => self.rx_gain_dbi = num(value)?,
            "system_loss" => self.system_loss = num(value)?,
            "noise_figure_db" => self.noise_figure_db = num(value)?,
            "mmwave_alpha" => self.mmwave.alpha_db = num(value)?,
            "mmwave_beta" => self.mmwave.beta = num(value)?,
            "mmwave_sigma" => self.mmwave.sigma_db = num(value)?,
            "max_range_m" => self.mmwave.max_range_m = num(value)?,
            "v_mid_kmh" => self.velocity.v_mid_kmh = num(value)?,
            "s_v_kmh" => self.velocity.s_v_kmh = num(value)?,
            "outage_db" => self.velocity.outage_db = num(value)?,
            "velocity_slope_db_per_kmh" => self.velocity.lte_slope_db_per_kmh = num(value)?,
            "beam_refresh_ms" => self.beam_refresh_ms = num(value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn apply_phy(&mut self, key: &str, value: &str) -> Result<bool, String> {
        match key {
            "scs_khz" => self.scs_khz = int(value)?,
            "rb_count" => self.rb_count = int(value)?,
            "scheduler" => {
                self.scheduler = match value {
                    "pf" => SchedulerKind::ProportionalFair,
                    "rr" => SchedulerKind::RoundRobin,
                    other => return Err(format!("expected pf or rr, got '{other}'")),
                }
            }
            "pf_window" => self.pf_window = int(value)?,
            "la_overhead" => self.la.overhead = num(value)?,
            "la_eff_max" => self.la.eff_max = num(value)?,
            "la_snr_floor_db" => self.la.snr_floor_db = num(value)?,
            "harq_max_retx" => self.harq_max_retx = int(value)?,
            "harq_rtt_ms" => self.harq_rtt_ms = num(value)?,
            "harq_combining_db" => self.harq_combining_db = num(value)?,
            "bler_threshold_db" => self.bler.threshold_db = num(value)?,
            "bler_steepness_db" => self.bler.steepness_db = num(value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn check(&self, issues: &mut Vec<FieldIssue>) {
        let r = format!("radio.{}", self.rat);
        let p = format!("phy.{}", self.rat);
        let mut bad = |field: String, message: String| issues.push(FieldIssue { field, message });
        match self.carrier.freq_mhz() {
            Ok(f) if f > 0.0 => {}
            Ok(f) => bad(format!("{r}.carrier_freq_mhz"), format!("must be > 0, got {f}")),
            Err(e) => bad(format!("{r}.carrier"), e),
        }
        if !(self.bandwidth_mhz > 0.0) {
            bad(format!("{r}.bandwidth_mhz"), "must be > 0".into());
        }
        if !(self.system_loss >= 1.0) {
            bad(format!("{r}.system_loss"), "must be >= 1".into());
        }
        if !(self.mmwave.beta > 0.0) {
            bad(format!("{r}.mmwave_beta"), "must be > 0".into());
        }
        if !(self.mmwave.sigma_db >= 0.0) {
            bad(format!("{r}.mmwave_sigma"), "must be >= 0".into());
        }
        if !(self.mmwave.max_range_m > 0.0) {
            bad(format!("{r}.max_range_m"), "must be > 0".into());
        }
        if !(self.velocity.s_v_kmh > 0.0) {
            bad(format!("{r}.s_v_kmh"), "must be > 0".into());
        }
        if !(self.beam_refresh_ms > 0.0) {
            bad(format!("{r}.beam_refresh_ms"), "must be > 0".into());
        }
        if let Err(e) = slot_duration_s(self.scs_khz) {
            bad(format!("{p}.scs_khz"), e.to_string());
        }
        if self.rb_count == 0 {
            bad(format!("{p}.rb_count"), "must be >= 1".into());
        }
        if self.pf_window == 0 {
            bad(format!("{p}.pf_window"), "must be >= 1".into());
        }
        if !(self.la.overhead > 0.0 && self.la.overhead <= 1.0) {
            bad(format!("{p}.la_overhead"), "must lie in (0, 1]".into());
        }
        if !(self.la.eff_max > 0.0) {
            bad(format!("{p}.la_eff_max"), "must be > 0".into());
        }
        if !(self.harq_rtt_ms > 0.0) {
            bad(format!("{p}.harq_rtt_ms"), "must be > 0".into());
        }
        if !(self.bler.steepness_db > 0.0) {
            bad(format!("{p}.bler_steepness_db"), "must be > 0".into());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficParams {
    pub data_volume_mbps: f64,
    pub packet_size_bytes: u32,
    pub queue_capacity_pkts: usize,
    pub app_start_s: f64,
    /// `None` runs the sources until `duration_s`.
    pub app_stop_s: Option<f64>,
    pub core_latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityParams {
    pub placement: Placement,
    pub speed_kmh: f64,
    pub corridor_min_m: f64,
    pub corridor_max_m: f64,
    pub sweep: MobilitySweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub preset: Preset,
    pub rats: Vec<Rat>,
    pub ue_count: usize,
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<f64>,
    pub duration_s: f64,
    pub warmup_s: f64,
    /// Cap on the post-run drain phase.
    pub drain_limit_s: f64,
    pub replications: u32,
    pub seed_base: u64,
    pub lte: RatParams,
    pub nr: RatParams,
    pub traffic: TrafficParams,
    pub mobility: MobilityParams,
}

pub const SCENARIO1_UE_COUNTS: [f64; 10] = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0];
pub const SCENARIO2_RATES_MBPS: [f64; 8] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
pub const SCENARIO3_DISTANCES_M: [f64; 10] = [20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 160.0, 180.0, 200.0];

/// 0–60 km/h in 5 km/h steps.
pub fn scenario3_speeds_kmh() -> Vec<f64> {
    (0..=12).map(|i| f64::from(i) * 5.0).collect()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::preset(Preset::Custom, MobilitySweep::Speed)
    }
}

impl ScenarioConfig {
    pub fn preset(preset: Preset, mobility_sweep: MobilitySweep) -> Self {
        let mut cfg = ScenarioConfig {
            preset,
            rats: vec![Rat::Lte, Rat::Nr],
            ue_count: 8,
            sweep_variable: SweepVariable::UeCount,
            sweep_values: vec![8.0],
            duration_s: 20.0,
            warmup_s: 1.0,
            drain_limit_s: 10.0,
            replications: 5,
            seed_base: 1,
            lte: RatParams::lte(),
            nr: RatParams::nr(),
            traffic: TrafficParams {
                data_volume_mbps: 2.0,
                packet_size_bytes: 1250,
                queue_capacity_pkts: 100,
                app_start_s: 0.0,
                app_stop_s: None,
                core_latency_ms: 1.0,
            },
            mobility: MobilityParams {
                placement: Placement::Uniform { min: 20.0, max: 200.0 },
                speed_kmh: 0.0,
                corridor_min_m: 20.0,
                corridor_max_m: 200.0,
                sweep: mobility_sweep,
            },
        };
        match preset {
            Preset::Scenario1 => {
                cfg.sweep_variable = SweepVariable::UeCount;
                cfg.sweep_values = SCENARIO1_UE_COUNTS.to_vec();
            }
            Preset::Scenario2 => {
                cfg.sweep_variable = SweepVariable::DataVolumeMbps;
                cfg.sweep_values = SCENARIO2_RATES_MBPS.to_vec();
            }
            Preset::Scenario3 => {
                // lower half of the 20–200 m distance table
                cfg.mobility.placement = Placement::Uniform { min: 20.0, max: 100.0 };
                match mobility_sweep {
                    MobilitySweep::Speed => {
                        cfg.sweep_variable = SweepVariable::SpeedKmh;
                        cfg.sweep_values = scenario3_speeds_kmh();
                    }
                    MobilitySweep::StartDistance => {
                        cfg.sweep_variable = SweepVariable::StartDistanceM;
                        cfg.sweep_values = SCENARIO3_DISTANCES_M.to_vec();
                    }
                }
            }
            Preset::Custom => {}
        }
        cfg
    }

    pub fn scenario_name(&self) -> &'static str {
        self.preset.as_str()
    }

    pub fn rat_params(&self, rat: Rat) -> &RatParams {
        match rat {
            Rat::Lte => &self.lte,
            Rat::Nr => &self.nr,
        }
    }

    pub fn app_stop_s(&self) -> f64 {
        self.traffic.app_stop_s.unwrap_or(self.duration_s)
    }

    /// Every effective key in canonical order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        out.push(("preset".into(), self.preset.as_str().into()));
        out.push((
            "rats".into(),
            self.rats.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(","),
        ));
        out.push(("ue_count".into(), self.ue_count.to_string()));
        out.push(("sweep_variable".into(), self.sweep_variable.as_str().into()));
        out.push(("sweep_values".into(), list(&self.sweep_values)));
        out.push(("duration_s".into(), self.duration_s.to_string()));
        out.push(("warmup_s".into(), self.warmup_s.to_string()));
        out.push(("drain_limit_s".into(), self.drain_limit_s.to_string()));
        out.push(("replications".into(), self.replications.to_string()));
        out.push(("seed_base".into(), self.seed_base.to_string()));
        self.lte.entries(&mut out);
        self.nr.entries(&mut out);
        let t = &self.traffic;
        out.push(("traffic.data_volume_mbps".into(), t.data_volume_mbps.to_string()));
        out.push(("traffic.packet_size_bytes".into(), t.packet_size_bytes.to_string()));
        out.push(("traffic.queue_capacity_pkts".into(), t.queue_capacity_pkts.to_string()));
        out.push(("traffic.app_start_s".into(), t.app_start_s.to_string()));
        out.push((
            "traffic.app_stop_s".into(),
            t.app_stop_s.map_or_else(|| "auto".to_string(), |s| s.to_string()),
        ));
        out.push(("traffic.core_latency_ms".into(), t.core_latency_ms.to_string()));
        let m = &self.mobility;
        out.push(("mobility.placement".into(), m.placement.to_string()));
        out.push(("mobility.speed_kmh".into(), m.speed_kmh.to_string()));
        out.push(("mobility.corridor_min_m".into(), m.corridor_min_m.to_string()));
        out.push(("mobility.corridor_max_m".into(), m.corridor_max_m.to_string()));
        out.push(("mobility.sweep".into(), m.sweep.as_str().into()));
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(&k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<bool, String> {
        match key {
            // consumed during preset expansion
            "preset" | "mobility.sweep" => {}
            "rats" => {
                let mut rats = Vec::new();
                for part in value.split(',') {
                    let rat: Rat = part.parse()?;
                    if !rats.contains(&rat) {
                        rats.push(rat);
                    }
                }
                self.rats = rats;
            }
            "ue_count" => self.ue_count = int(value)?,
            "sweep_variable" => {
                self.sweep_variable =
                    SweepVariable::parse(value).ok_or_else(|| format!("unknown sweep variable '{value}'"))?
            }
            "sweep_values" => {
                self.sweep_values = if value.trim().is_empty() {
                    vec![]
                } else {
                    value.split(',').map(num).collect::<Result<_, _>>()?
                }
            }
            "duration_s" => self.duration_s = num(value)?,
            "warmup_s" => self.warmup_s = num(value)?,
            "drain_limit_s" => self.drain_limit_s = num(value)?,
            "replications" => self.replications = int(value)?,
            "seed_base" => self.seed_base = int(value)?,
            "traffic.data_volume_mbps" => self.traffic.data_volume_mbps = num(value)?,
            "traffic.packet_size_bytes" => self.traffic.packet_size_bytes = int(value)?,
            "traffic.queue_capacity_pkts" => self.traffic.queue_capacity_pkts = int(value)?,
            "traffic.app_start_s" => self.traffic.app_start_s = num(value)?,
            "traffic.app_stop_s" => {
                self.traffic.app_stop_s = if value == "auto" { None } else { Some(num(value)?) }
            }
            "traffic.core_latency_ms" => self.traffic.core_latency_ms = num(value)?,
            "mobility.placement" => self.mobility.placement = value.parse()?,
            "mobility.speed_kmh" => self.mobility.speed_kmh = num(value)?,
            "mobility.corridor_min_m" => self.mobility.corridor_min_m = num(value)?,
            "mobility.corridor_max_m" => self.mobility.corridor_max_m = num(value)?,
            _ => {
                if let Some(rest) = key.strip_prefix("radio.lte.") {
                    return self.lte.apply_radio(rest, value);
                }
                if let Some(rest) = key.strip_prefix("radio.nr.") {
                    return self.nr.apply_radio(rest, value);
                }
                if let Some(rest) = key.strip_prefix("phy.lte.") {
                    return self.lte.apply_phy(rest, value);
                }
                if let Some(rest) = key.strip_prefix("phy.nr.") {
                    return self.nr.apply_phy(rest, value);
                }
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn issues(&self) -> Vec<FieldIssue> {
        let mut issues = Vec::new();
        let mut bad = |field: &str, message: String| {
            issues.push(FieldIssue {
                field: field.to_string(),
                message,
            })
        };
        if self.rats.is_empty() {
            bad("rats", "at least one RAT required".into());
        }
        if self.replications < 1 {
            bad("replications", format!("must be >= 1, got {}", self.replications));
        }
        if !(self.duration_s > 0.0) {
            bad("duration_s", "must be > 0".into());
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s < self.duration_s) {
            bad("warmup_s", format!("must satisfy 0 <= warmup_s < duration_s ({})", self.duration_s));
        }
        if !(self.drain_limit_s >= 0.0) {
            bad("drain_limit_s", "must be >= 0".into());
        }
        if self.sweep_values.is_empty() {
            bad("sweep_values", "must not be empty".into());
        }
        let (lo, hi) = (self.mobility.corridor_min_m, self.mobility.corridor_max_m);
        for v in &self.sweep_values {
            let ok = match self.sweep_variable {
                SweepVariable::UeCount => *v >= 1.0 && v.fract() == 0.0,
                SweepVariable::DataVolumeMbps => *v > 0.0,
                SweepVariable::SpeedKmh => *v >= 0.0,
                SweepVariable::StartDistanceM => *v >= lo && *v <= hi,
            };
            if !ok {
                bad("sweep_values", format!("value {v} invalid for {}", self.sweep_variable.as_str()));
            }
        }
        if self.ue_count < 1 {
            bad("ue_count", "must be >= 1".into());
        }
        let t = &self.traffic;
        if !(t.data_volume_mbps > 0.0) {
            bad("traffic.data_volume_mbps", "must be > 0".into());
        }
        if t.packet_size_bytes == 0 || t.packet_size_bytes > MAX_PACKET_SIZE {
            bad("traffic.packet_size_bytes", format!("must be in 1..={MAX_PACKET_SIZE}"));
        }
        if t.queue_capacity_pkts == 0 {
            bad("traffic.queue_capacity_pkts", "must be >= 1".into());
        }
        if !(t.app_start_s >= 0.0 && t.app_start_s < self.app_stop_s()) {
            bad("traffic.app_start_s", "must be >= 0 and before app_stop_s".into());
        }
        if self.app_stop_s() > self.duration_s {
            bad("traffic.app_stop_s", "must not exceed duration_s".into());
        }
        if !(t.core_latency_ms >= 0.0) {
            bad("traffic.core_latency_ms", "must be >= 0".into());
        }
        let m = &self.mobility;
        if !(m.corridor_min_m >= 1.0) {
            bad("mobility.corridor_min_m", "must be >= 1".into());
        }
        if !(m.corridor_max_m > m.corridor_min_m) {
            bad("mobility.corridor_max_m", "must exceed corridor_min_m".into());
        }
        if self.rats.contains(&Rat::Nr) && m.corridor_max_m > self.nr.mmwave.max_range_m {
            bad(
                "mobility.corridor_max_m",
                format!("exceeds NR coverage radio.nr.max_range_m = {}", self.nr.mmwave.max_range_m),
            );
        }
        if !(m.speed_kmh >= 0.0) {
            bad("mobility.speed_kmh", "must be >= 0".into());
        }
        let radii = m.placement.radii(self.ue_count.max(1));
        if radii.iter().any(|r| *r < m.corridor_min_m || *r > m.corridor_max_m) {
            bad("mobility.placement", format!("radii must lie inside the corridor [{lo}, {hi}] m"));
        }
        for rat in &self.rats {
            self.rat_params(*rat).check(&mut issues);
        }
        issues
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(issues))
        }
    }
}

fn num(value: &str) -> Result<f64, String> {
    let v = value.trim();
    v.parse::<f64>().map_err(|_| format!("expected a number, got '{v}'"))
}

fn int<T: FromStr>(value: &str) -> Result<T, String> {
    let v = value.trim();
    v.parse::<T>().map_err(|_| format!("expected a non-negative integer, got '{v}'"))
}

/// Parse and validate a configuration file.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut lines: Vec<(usize, String, String)> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            });
        };
        let key = key.trim().to_string();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ConfigError::Syntax {
                line,
                message: format!("malformed key '{key}'"),
            });
        }
        if seen.insert(key.clone(), line).is_some() {
            return Err(ConfigError::DuplicateKey { line, key });
        }
        lines.push((line, key, value.trim().to_string()));
    }

    let lookup = |name: &str| lines.iter().find(|(_, k, _)| k == name);
    let preset = match lookup("preset") {
        Some((line, key, v)) => v.parse::<Preset>().map_err(|message| ConfigError::BadValue {
            line: *line,
            key: key.clone(),
            message,
        })?,
        None => Preset::Custom,
    };
    let sweep = match lookup("mobility.sweep") {
        Some((line, key, v)) => match v.as_str() {
            "speed" => MobilitySweep::Speed,
            "start_distance" => MobilitySweep::StartDistance,
            other => {
                return Err(ConfigError::BadValue {
                    line: *line,
                    key: key.clone(),
                    message: format!("expected speed or start_distance, got '{other}'"),
                })
            }
        },
        None => MobilitySweep::Speed,
    };

    let mut cfg = ScenarioConfig::preset(preset, sweep);
    for (line, key, value) in &lines {
        match cfg.apply(key, value) {
            Ok(true) => {}
            Ok(false) => {
                return Err(ConfigError::UnknownKey {
                    line: *line,
                    key: key.clone(),
                })
            }
            Err(message) => {
                return Err(ConfigError::BadValue {
                    line: *line,
                    key: key.clone(),
                    message,
                })
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_preset_expands() {
        let cfg = parse_config("preset=scenario1").unwrap();
        assert_eq!(cfg.sweep_variable, SweepVariable::UeCount);
        assert_eq!(cfg.sweep_values, SCENARIO1_UE_COUNTS.to_vec());
        assert_eq!(cfg.traffic.data_volume_mbps, 2.0);
        assert_eq!(cfg.mobility.speed_kmh, 0.0);
        assert_eq!(cfg.rats, vec![Rat::Lte, Rat::Nr]);

        let s2 = parse_config("preset = scenario2").unwrap();
        assert_eq!(s2.ue_count, 8);
        assert_eq!(s2.sweep_values, SCENARIO2_RATES_MBPS.to_vec());

        let s3 = parse_config("preset = scenario3").unwrap();
        assert_eq!(s3.sweep_variable, SweepVariable::SpeedKmh);
        assert_eq!(s3.mobility.placement, Placement::Uniform { min: 20.0, max: 100.0 });
        let s3d = parse_config("preset = scenario3\nmobility.sweep = start_distance").unwrap();
        assert_eq!(s3d.sweep_values, SCENARIO3_DISTANCES_M.to_vec());
    }

    #[test]
    fn zero_replications_names_field() {
        let err = parse_config("preset=scenario1\nreplications=0").unwrap_err();
        match err {
            ConfigError::Invalid(issues) => assert!(issues.iter().any(|i| i.field == "replications")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn multiple_issues_are_reported_together() {
        let err = parse_config("replications = 0\nwarmup_s = 30\nphy.lte.scs_khz = 45").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("replications"));
        assert!(text.contains("warmup_s"));
        assert!(text.contains("phy.lte.scs_khz"));
    }

    #[test]
    fn unknown_key_fails_closed() {
        assert_eq!(
            parse_config("preset=scenario1\n\nradio.lte.bogus = 3"),
            Err(ConfigError::UnknownKey {
                line: 3,
                key: "radio.lte.bogus".into()
            })
        );
    }

    #[test]
    fn syntax_error_reports_line() {
        assert!(matches!(
            parse_config("# comment\npreset scenario1"),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("seed_base = 1\nseed_base = 2"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("duration_s = soon"),
            Err(ConfigError::BadValue { line: 1, .. })
        ));
    }

    #[test]
    fn round_trip_all_presets() {
        for preset in [Preset::Scenario1, Preset::Scenario2, Preset::Scenario3, Preset::Custom] {
            for sweep in [MobilitySweep::Speed, MobilitySweep::StartDistance] {
                let cfg = ScenarioConfig::preset(preset, sweep);
                assert_eq!(parse_config(&cfg.render()).unwrap(), cfg);
            }
        }
    }

    #[test]
    fn round_trip_overrides() {
        let text = "preset = scenario2\nrats = nr\nradio.nr.nr_arfcn = 2054167\nphy.lte.harq_rtt_ms = 6\n\
                    traffic.app_stop_s = 15\nmobility.placement = 30,60,90\nseed_base = 99";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.nr.carrier.freq_mhz().unwrap(), 26500.08);
        assert_eq!(cfg.traffic.app_stop_s, Some(15.0));
        assert_eq!(parse_config(&cfg.render()).unwrap(), cfg);
    }

    #[test]
    fn corridor_must_fit_nr_coverage() {
        let err = parse_config("mobility.corridor_max_m = 250").unwrap_err();
        assert!(err.to_string().contains("mobility.corridor_max_m"));
        assert!(parse_config("rats = lte\nmobility.corridor_max_m = 250").is_ok());
    }

    #[test]
    fn carriers_resolve() {
        assert_eq!(RatParams::lte().radio().unwrap().carrier_freq_hz, 1930.0e6);
        let bad = parse_config("radio.lte.earfcn = 9000").unwrap_err();
        assert!(bad.to_string().contains("radio.lte.carrier"));
    }
}
