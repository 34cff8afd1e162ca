//! One single-cell run: CBR camera uplinks through an LTE or NR cell to the
//! remote sink, driven by the event engine.

use std::io::Write;

use thiserror::Error;

use crate::channel::{ChannelError, ChannelSample, RadioConfig, Rat, VelocityModel};
use crate::config::{RatParams, SchedulerKind};
use crate::engine::{Engine, EngineError, EventAction, RngStream};
use crate::metrics::FlowStats;
use crate::mobility::MobilityState;
use crate::phy::{
    achievable_rate_bps, harq_transmit, slot_duration_s, BlerCurve, HarqOutcome, HarqProcess, LinkAdaptation,
    PfScheduler, RoundRobin,
};
use crate::traffic::{DropCause, EnqueueOutcome, FlowQueue, Packet, Sink, TrafficError, VideoStream};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error("radio setup: {0}")]
    Radio(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    StreamStart { flow: usize },
    Arrival { flow: usize, seq: u64 },
    StreamStop { flow: usize },
    Slot { index: u64 },
    BeamRefresh { period: u64 },
    Delivery { packet: Packet },
    End,
}

impl EventAction for Action {
    fn kind(&self) -> &'static str {
        match self {
            Action::StreamStart { .. } => "stream_start",
            Action::Arrival { .. } => "arrival",
            Action::StreamStop { .. } => "stream_stop",
            Action::Slot { .. } => "slot",
            Action::BeamRefresh { .. } => "beam_refresh",
            Action::Delivery { .. } => "delivery",
            Action::End => "end",
        }
    }

    fn detail(&self) -> String {
        match self {
            Action::StreamStart { flow } | Action::StreamStop { flow } => format!("flow={flow}"),
            Action::Arrival { flow, seq } => format!("flow={flow} seq={seq}"),
            Action::Slot { index } => format!("slot={index}"),
            Action::BeamRefresh { period } => format!("period={period}"),
            Action::Delivery { packet } => format!(
                "flow={} seq={} attempts={}",
                packet.flow_id, packet.seq, packet.attempts
            ),
            Action::End => String::new(),
        }
    }
}

/// Fully resolved inputs of one run.
#[derive(Debug, Clone)]
pub struct CellSpec {
    pub rat: Rat,
    pub radio: RadioConfig,
    pub velocity: VelocityModel,
    pub beam_refresh_s: f64,
    pub slot_s: f64,
    pub rb_count: u32,
    pub scheduler: SchedulerKind,
    pub pf_window: u32,
    pub la: LinkAdaptation,
    pub harq: HarqProcess,
    pub bler: BlerCurve,
    pub ues: Vec<MobilityState>,
    pub speed_kmh: f64,
    pub rate_bps: f64,
    pub packet_size: u32,
    pub queue_capacity: usize,
    pub app_start_s: f64,
    pub app_stop_s: f64,
    pub warmup_s: f64,
    pub duration_s: f64,
    pub drain_limit_s: f64,
    pub core_latency_s: f64,
    pub seed: u64,
}

impl CellSpec {
    pub fn from_params(p: &RatParams) -> Result<Self, SimError> {
        let radio = p.radio().map_err(SimError::Radio)?;
        radio.validate()?;
        Ok(CellSpec {
            rat: p.rat,
            radio,
            velocity: p.velocity,
            beam_refresh_s: p.beam_refresh_ms / 1e3,
            slot_s: slot_duration_s(p.scs_khz).map_err(|e| SimError::Radio(e.to_string()))?,
            rb_count: p.rb_count,
            scheduler: p.scheduler,
            pf_window: p.pf_window,
            la: p.la,
            harq: p.harq(),
            bler: p.bler,
            ues: Vec::new(),
            speed_kmh: 0.0,
            rate_bps: 2e6,
            packet_size: 1250,
            queue_capacity: 100,
            app_start_s: 0.0,
            app_stop_s: 20.0,
            warmup_s: 1.0,
            duration_s: 20.0,
            drain_limit_s: 10.0,
            core_latency_s: 1e-3,
            seed: 1,
        })
    }

    /// Length of the counting window.
    pub fn window_s(&self) -> f64 {
        self.app_stop_s - self.warmup_s.max(self.app_start_s)
    }
}

#[derive(Debug, Clone)]
pub struct CellOutput {
    pub flows: Vec<FlowStats>,
    pub window_s: f64,
    pub events: u64,
}

struct UeState {
    mobility: MobilityState,
    stream: VideoStream,
    queue: FlowQueue,
    shadow_db: f64,
    penalty_db: f64,
    shadow_rng: RngStream,
    outage_rng: RngStream,
    harq_rng: RngStream,
}

struct Cell {
    spec: CellSpec,
    ues: Vec<UeState>,
    stats: Vec<FlowStats>,
    sink: Sink,
    pf: PfScheduler,
    rr: RoundRobin,
    stopped: bool,
}

impl Cell {
    fn new(spec: CellSpec) -> Self {
        let n = spec.ues.len();
        let ues = spec
            .ues
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let interval = f64::from(spec.packet_size) * 8.0 / spec.rate_bps;
                // spread stream phases across one packet interval
                let offset = interval * (i as f64 + 0.5) / n as f64;
                UeState {
                    mobility: *m,
                    stream: VideoStream {
                        flow_id: i,
                        rate_bps: spec.rate_bps,
                        packet_size: spec.packet_size,
                        start_s: spec.app_start_s + offset,
                        stop_s: spec.app_stop_s,
                    },
                    queue: FlowQueue::new(spec.queue_capacity),
                    shadow_db: 0.0,
                    penalty_db: 0.0,
                    shadow_rng: RngStream::new(&format!("shadowing/{i}"), spec.seed),
                    outage_rng: RngStream::new(&format!("outage/{i}"), spec.seed),
                    harq_rng: RngStream::new(&format!("harq/{i}"), spec.seed),
                }
            })
            .collect();
        Cell {
            pf: PfScheduler::new(n, spec.pf_window),
            rr: RoundRobin::new(),
            stats: (0..n).map(FlowStats::new).collect(),
            sink: Sink::new(n),
            ues,
            spec,
            stopped: false,
        }
    }

    fn sample(&self, ue: usize, t: f64) -> Result<ChannelSample, ChannelError> {
        let u = &self.ues[ue];
        let d = u.mobility.distance_at(t);
        self.spec.radio.snr_db(d, u.penalty_db, u.shadow_db)
    }

    fn has_backlog(&self) -> bool {
        self.ues.iter().any(|u| !u.queue.is_empty())
    }

    fn keep_ticking(&self) -> bool {
        !self.stopped || self.has_backlog()
    }

    fn drop_packet(&mut self, mut pkt: Packet, cause: DropCause) {
        pkt.drop_cause = Some(cause);
        if pkt.measured {
            self.stats[pkt.flow_id].record_drop(cause);
        }
    }

    fn refresh_beams(&mut self) {
        let sigma = match self.spec.rat {
            Rat::Nr => self.spec.radio.mmwave.sigma_db,
            Rat::Lte => 0.0,
        };
        let rat = self.spec.rat;
        let speed = self.spec.speed_kmh;
        let velocity = self.spec.velocity;
        for u in &mut self.ues {
            u.shadow_db = u.shadow_rng.normal(0.0, sigma);
            u.penalty_db = velocity.penalty_db(rat, speed, &mut u.outage_rng);
        }
    }

    fn on_arrival(&mut self, engine: &mut Engine<Action>, flow: usize, seq: u64) -> Result<(), SimError> {
        let now = engine.now();
        let stream = self.ues[flow].stream;
        let measured = now >= self.spec.warmup_s;
        let pkt = Packet::new(flow, seq, stream.packet_size, now, measured);
        if measured {
            self.stats[flow].record_created();
        }
        match self.sample(flow, now) {
            Err(ChannelError::OutOfCoverage { .. }) => self.drop_packet(pkt, DropCause::OutOfCoverage),
            Err(e) => return Err(e.into()),
            Ok(_) => {
                if let EnqueueOutcome::Dropped(p) = self.ues[flow].queue.enqueue(pkt) {
                    self.drop_packet(p, DropCause::QueueOverflow);
                }
            }
        }
        if let Some(next) = stream.emit_time(seq + 1) {
            engine.schedule(next, Action::Arrival { flow, seq: seq + 1 })?;
        }
        Ok(())
    }

    /// Transmit `bits` from UE `ue`'s queue in the slot starting now.
    fn transmit(&mut self, engine: &mut Engine<Action>, ue: usize, bits: f64, snr_db: f64) -> Result<(), SimError> {
        let done = self.ues[ue].queue.serve(bits);
        let slot_end = engine.now() + self.spec.slot_s;
        for mut pkt in done {
            let outcome = harq_transmit(snr_db, &self.spec.harq, &self.spec.bler, &mut self.ues[ue].harq_rng);
            pkt.attempts = outcome.attempts();
            match outcome {
                HarqOutcome::Delivered { added_delay_s, .. } => {
                    let t = slot_end + added_delay_s + self.spec.core_latency_s;
                    engine.schedule(t, Action::Delivery { packet: pkt })?;
                }
                HarqOutcome::Dropped { .. } => self.drop_packet(pkt, DropCause::HarqExhausted),
            }
        }
        Ok(())
    }

    fn on_slot(&mut self, engine: &mut Engine<Action>, index: u64) -> Result<(), SimError> {
        let now = engine.now();
        let n = self.ues.len();
        // (rate on the link-adaptation estimate, SNR the decoder actually sees)
        let mut link = vec![(0.0, f64::NEG_INFINITY); n];
        let rb_bw = self.spec.radio.bandwidth_hz / f64::from(self.spec.rb_count);
        for (ue, slot) in link.iter_mut().enumerate() {
            if self.ues[ue].queue.is_empty() {
                continue;
            }
            match self.sample(ue, now) {
                Ok(s) => {
                    // the beam/Doppler penalty is invisible to link adaptation
                    let estimate = s.snr_db + s.penalties_db;
                    let bw = match self.spec.scheduler {
                        SchedulerKind::ProportionalFair => rb_bw,
                        SchedulerKind::RoundRobin => self.spec.radio.bandwidth_hz,
                    };
                    *slot = (achievable_rate_bps(estimate, bw, &self.spec.la), s.snr_db);
                }
                Err(ChannelError::OutOfCoverage { .. }) => {
                    for pkt in self.ues[ue].queue.drain_all() {
                        self.drop_packet(pkt, DropCause::OutOfCoverage);
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }

        match self.spec.scheduler {
            SchedulerKind::ProportionalFair => {
                let rates: Vec<f64> = link.iter().map(|l| l.0).collect();
                let backlog: Vec<f64> = self.ues.iter().map(|u| u.queue.backlog_bits()).collect();
                let alloc = self.pf.allocate(&rates, &backlog, self.spec.rb_count, self.spec.slot_s);
                for (ue, rbs) in alloc.into_iter().enumerate() {
                    if rbs > 0 {
                        let bits = f64::from(rbs) * rates[ue] * self.spec.slot_s;
                        self.transmit(engine, ue, bits, link[ue].1)?;
                    }
                }
            }
            SchedulerKind::RoundRobin => {
                let backlogged: Vec<bool> = self.ues.iter().map(|u| !u.queue.is_empty()).collect();
                if let Some(ue) = self.rr.pick(&backlogged) {
                    let bits = link[ue].0 * self.spec.slot_s;
                    if bits > 0.0 {
                        self.transmit(engine, ue, bits, link[ue].1)?;
                    }
                }
            }
        }

        if self.keep_ticking() {
            let next = index + 1;
            engine.schedule(next as f64 * self.spec.slot_s, Action::Slot { index: next })?;
        }
        Ok(())
    }

    fn handle(&mut self, engine: &mut Engine<Action>, action: Action) -> Result<(), SimError> {
        match action {
            Action::StreamStart { flow } => {
                if self.ues[flow].stream.emit_time(0).is_some() {
                    self.on_arrival(engine, flow, 0)?;
                }
            }
            Action::Arrival { flow, seq } => self.on_arrival(engine, flow, seq)?,
            Action::StreamStop { .. } => {}
            Action::Slot { index } => self.on_slot(engine, index)?,
            Action::BeamRefresh { period } => {
                self.refresh_beams();
                if self.keep_ticking() {
                    let next = period + 1;
                    engine.schedule(next as f64 * self.spec.beam_refresh_s, Action::BeamRefresh { period: next })?;
                }
            }
            Action::Delivery { mut packet } => {
                let flow = packet.flow_id;
                let now = engine.now();
                let start = self.spec.warmup_s.max(self.spec.app_start_s);
                if now >= start && now <= self.spec.app_stop_s {
                    self.stats[flow].record_window_bytes(packet.size);
                }
                self.sink.receive(&mut packet, now, &mut self.stats[flow])?;
            }
            Action::End => self.stopped = true,
        }
        Ok(())
    }
}

/// Simulate one run; `trace` receives the processed-event log.
pub fn simulate_cell(spec: CellSpec, trace: Option<Box<dyn Write + Send>>) -> Result<CellOutput, SimError> {
    let mut engine: Engine<Action> = Engine::new();
    if let Some(sink) = trace {
        engine = engine.with_trace(sink);
    }
    let horizon = spec.duration_s + spec.drain_limit_s;
    let window_s = spec.window_s();
    let mut cell = Cell::new(spec);

    cell.refresh_beams();
    engine.schedule(cell.spec.beam_refresh_s, Action::BeamRefresh { period: 1 })?;
    engine.schedule(0.0, Action::Slot { index: 0 })?;
    for (flow, ue) in cell.ues.iter().enumerate() {
        engine.schedule(ue.stream.start_s, Action::StreamStart { flow })?;
        engine.schedule(ue.stream.stop_s, Action::StreamStop { flow })?;
    }
    engine.schedule(cell.spec.duration_s, Action::End)?;

    let mut failure: Option<SimError> = None;
    engine.run(horizon, |eng, ev| {
        if failure.is_none() {
            if let Err(e) = cell.handle(eng, ev.action) {
                failure = Some(e);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    // anything left was cut off by the drain limit
    for ue in &mut cell.ues {
        for pkt in ue.queue.drain_all() {
            if pkt.measured {
                cell.stats[pkt.flow_id].in_flight += 1;
            }
        }
    }
    while let Some(ev) = engine.next_before(f64::MAX) {
        if let Action::Delivery { packet } = ev.action {
            if packet.measured {
                cell.stats[packet.flow_id].in_flight += 1;
            }
        }
    }

    Ok(CellOutput {
        flows: cell.stats,
        window_s,
        events: engine.processed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::Placement;

    fn spec(rat: Rat, n: usize, rate_mbps: f64) -> CellSpec {
        let params = match rat {
            Rat::Lte => RatParams::lte(),
            Rat::Nr => RatParams::nr(),
        };
        let mut s = CellSpec::from_params(&params).unwrap();
        s.ues = Placement::Uniform { min: 20.0, max: 200.0 }.layout(n, 0.0, 20.0, 200.0);
        s.rate_bps = rate_mbps * 1e6;
        s.duration_s = 5.0;
        s.app_stop_s = 5.0;
        s.warmup_s = 1.0;
        s
    }

    #[test]
    fn light_load_is_lossless() {
        for rat in Rat::ALL {
            let out = simulate_cell(spec(rat, 2, 2.0), None).unwrap();
            for f in &out.flows {
                assert!(f.is_conserved());
                assert_eq!(f.rx_packets, f.tx_packets, "{rat}");
                assert_eq!(f.in_flight, 0);
            }
        }
    }

    #[test]
    fn lte_overload_drops_at_the_queue() {
        let out = simulate_cell(spec(Rat::Lte, 8, 5.0), None).unwrap();
        let tx: u64 = out.flows.iter().map(|f| f.tx_packets).sum();
        let qd: u64 = out.flows.iter().map(|f| f.dropped(DropCause::QueueOverflow)).sum();
        assert!(qd as f64 / tx as f64 > 0.5);
        assert!(out.flows.iter().all(FlowStats::is_conserved));
    }

    #[test]
    fn out_of_coverage_ue_loses_everything() {
        let mut s = spec(Rat::Nr, 2, 2.0);
        s.ues[1] = MobilityState::fixed([250.0, 0.0], 1.0, 300.0);
        let out = simulate_cell(s, None).unwrap();
        assert_eq!(out.flows[1].rx_packets, 0);
        assert_eq!(out.flows[1].dropped(DropCause::OutOfCoverage), out.flows[1].tx_packets);
        assert_eq!(out.flows[0].rx_packets, out.flows[0].tx_packets);
    }

    #[test]
    fn nr_outage_turns_into_harq_drops() {
        let mut s = spec(Rat::Nr, 4, 2.0);
        s.speed_kmh = 200.0;
        let out = simulate_cell(s, None).unwrap();
        let tx: u64 = out.flows.iter().map(|f| f.tx_packets).sum();
        let hd: u64 = out.flows.iter().map(|f| f.dropped(DropCause::HarqExhausted)).sum();
        assert!(hd as f64 > 0.99 * tx as f64, "{hd}/{tx}");
    }

    #[test]
    fn drain_limit_leaves_packets_in_flight() {
        let mut s = spec(Rat::Lte, 8, 5.0);
        s.drain_limit_s = 0.0;
        let out = simulate_cell(s, None).unwrap();
        assert!(out.flows.iter().map(|f| f.in_flight).sum::<u64>() > 0);
        assert!(out.flows.iter().all(FlowStats::is_conserved));
    }

    #[test]
    fn identical_seed_identical_counters() {
        let a = simulate_cell(spec(Rat::Nr, 6, 3.0), None).unwrap();
        let b = simulate_cell(spec(Rat::Nr, 6, 3.0), None).unwrap();
        assert_eq!(a.flows, b.flows);
        assert_eq!(a.events, b.events);
    }
}
