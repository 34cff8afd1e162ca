//! Constant-bitrate video sources, per-UE drop-tail queues and the sink.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::metrics::FlowStats;

pub const MAX_PACKET_SIZE: u32 = 1500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("flow {flow_id}: packet {seq} delivered twice")]
    DuplicateDelivery { flow_id: usize, seq: u64 },
    #[error("invalid stream: {0}")]
    InvalidStream(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoStream {
    pub flow_id: usize,
    pub rate_bps: f64,
    pub packet_size: u32,
    pub start_s: f64,
    pub stop_s: f64,
}

impl VideoStream {
    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(self.rate_bps > 0.0) {
            return Err(TrafficError::InvalidStream(format!("rate must be > 0, got {}", self.rate_bps)));
        }
        if self.packet_size == 0 || self.packet_size > MAX_PACKET_SIZE {
            return Err(TrafficError::InvalidStream(format!(
                "packet size must be in 1..={MAX_PACKET_SIZE}, got {}",
                self.packet_size
            )));
        }
        if self.stop_s < self.start_s {
            return Err(TrafficError::InvalidStream("stop precedes start".into()));
        }
        Ok(())
    }

    pub fn interval_s(&self) -> f64 {
        f64::from(self.packet_size) * 8.0 / self.rate_bps
    }

    /// Creation time of packet `k`, or `None` once the stream has stopped.
    pub fn emit_time(&self, k: u64) -> Option<f64> {
        let t = self.start_s + k as f64 * self.interval_s();
        (t < self.stop_s).then_some(t)
    }
}

pub fn cbr_emit_times(stream: &VideoStream) -> Vec<f64> {
    (0..).map_while(|k| stream.emit_time(k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropCause {
    QueueOverflow,
    HarqExhausted,
    OutOfCoverage,
}

impl fmt::Display for DropCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropCause::QueueOverflow => "queue_overflow",
            DropCause::HarqExhausted => "harq_exhausted",
            DropCause::OutOfCoverage => "out_of_coverage",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub flow_id: usize,
    pub seq: u64,
    pub size: u32,
    pub t_created: f64,
    pub t_delivered: Option<f64>,
    pub attempts: u32,
    pub drop_cause: Option<DropCause>,
    /// Created inside the measurement window.
    pub measured: bool,
}

impl Packet {
    pub fn new(flow_id: usize, seq: u64, size: u32, t_created: f64, measured: bool) -> Self {
        Packet {
            flow_id,
            seq,
            size,
            t_created,
            t_delivered: None,
            attempts: 0,
            drop_cause: None,
            measured,
        }
    }

    pub fn bits(&self) -> f64 {
        f64::from(self.size) * 8.0
    }
}

#[derive(Debug, PartialEq)]
pub enum EnqueueOutcome {
    Accepted,
    Dropped(Packet),
}

/// Drop-tail FIFO of whole packets. The head may be partially transmitted.
#[derive(Debug, Clone)]
pub struct FlowQueue {
    capacity: usize,
    packets: VecDeque<Packet>,
    head_sent_bits: f64,
    backlog_bits: f64,
}

impl FlowQueue {
    pub fn new(capacity: usize) -> Self {
        FlowQueue {
            capacity,
            packets: VecDeque::new(),
            head_sent_bits: 0.0,
            backlog_bits: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn backlog_bits(&self) -> f64 {
        self.backlog_bits
    }

    pub fn enqueue(&mut self, mut pkt: Packet) -> EnqueueOutcome {
        if self.packets.len() >= self.capacity {
            pkt.drop_cause = Some(DropCause::QueueOverflow);
            return EnqueueOutcome::Dropped(pkt);
        }
        self.backlog_bits += pkt.bits();
        self.packets.push_back(pkt);
        EnqueueOutcome::Accepted
    }

    /// Transmit up to `bits` from the head; returns the packets whose last
    /// bit went out.
    pub fn serve(&mut self, mut bits: f64) -> Vec<Packet> {
        let mut done = Vec::new();
        while bits > 0.0 {
            let Some(head) = self.packets.front() else { break };
            let remaining = head.bits() - self.head_sent_bits;
            if bits + 1e-9 >= remaining {
                bits -= remaining;
                self.head_sent_bits = 0.0;
                let pkt = self.packets.pop_front().expect("head exists");
                self.backlog_bits -= remaining;
                done.push(pkt);
            } else {
                self.head_sent_bits += bits;
                self.backlog_bits -= bits;
                bits = 0.0;
            }
        }
        if self.packets.is_empty() {
            self.backlog_bits = 0.0;
        }
        done
    }

    pub fn drain_all(&mut self) -> Vec<Packet> {
        self.head_sent_bits = 0.0;
        self.backlog_bits = 0.0;
        self.packets.drain(..).collect()
    }
}

/// Receiving end: stamps delivery and rejects duplicates.
#[derive(Debug, Clone, Default)]
pub struct Sink {
    seen: Vec<Vec<bool>>,
}

impl Sink {
    pub fn new(n_flows: usize) -> Self {
        Sink {
            seen: vec![Vec::new(); n_flows],
        }
    }

    pub fn receive(&mut self, pkt: &mut Packet, t: f64, stats: &mut FlowStats) -> Result<(), TrafficError> {
        if pkt.flow_id >= self.seen.len() {
            self.seen.resize(pkt.flow_id + 1, Vec::new());
        }
        let seen = &mut self.seen[pkt.flow_id];
        let idx = pkt.seq as usize;
        if idx >= seen.len() {
            seen.resize(idx + 1, false);
        }
        if seen[idx] {
            return Err(TrafficError::DuplicateDelivery {
                flow_id: pkt.flow_id,
                seq: pkt.seq,
            });
        }
        seen[idx] = true;
        pkt.t_delivered = Some(t);
        if pkt.measured {
            stats.record_delivery(pkt.size, t - pkt.t_created);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn stream(rate: f64, start: f64, stop: f64) -> VideoStream {
        VideoStream {
            flow_id: 0,
            rate_bps: rate,
            packet_size: 1250,
            start_s: start,
            stop_s: stop,
        }
    }

    #[test]
    fn two_megabit_stream_is_200_pps() {
        let s = stream(2e6, 0.0, 1.0);
        assert_relative_eq!(s.interval_s(), 0.005);
        assert_eq!(cbr_emit_times(&s).len(), 200);
        assert_relative_eq!(stream(8e6, 0.0, 1.0).interval_s(), 0.00125);
        assert!(cbr_emit_times(&stream(2e6, 3.0, 3.0)).is_empty());
    }

    #[test]
    fn emit_times_are_evenly_spaced() {
        let times = cbr_emit_times(&stream(2e6, 0.5, 0.6));
        assert_eq!(times[0], 0.5);
        for w in times.windows(2) {
            assert_relative_eq!(w[1] - w[0], 0.005, epsilon = 1e-12);
        }
        assert!(*times.last().unwrap() < 0.6);
    }

    #[test]
    fn queue_drop_tail() {
        let mut q = FlowQueue::new(100);
        for seq in 0..100 {
            assert_eq!(q.enqueue(Packet::new(0, seq, 1250, 0.0, true)), EnqueueOutcome::Accepted);
        }
        match q.enqueue(Packet::new(0, 100, 1250, 0.0, true)) {
            EnqueueOutcome::Dropped(p) => assert_eq!(p.drop_cause, Some(DropCause::QueueOverflow)),
            other => panic!("{other:?}"),
        }
        assert_eq!(q.len(), 100);
    }

    #[test]
    fn serve_segments_packets() {
        let mut q = FlowQueue::new(10);
        q.enqueue(Packet::new(0, 0, 1250, 0.0, true));
        q.enqueue(Packet::new(0, 1, 1250, 0.0, true));
        assert!(q.serve(6000.0).is_empty());
        assert_relative_eq!(q.backlog_bits(), 14_000.0);
        let done = q.serve(6000.0);
        assert_eq!(done.len(), 1);
        assert_eq!(done[0].seq, 0);
        assert_relative_eq!(q.backlog_bits(), 8000.0);
        assert_eq!(q.serve(1e9).len(), 1);
        assert_eq!(q.backlog_bits(), 0.0);
    }

    #[test]
    fn sink_accounting() {
        let mut sink = Sink::new(1);
        let mut stats = FlowStats::new(0);
        let mut p = Packet::new(0, 0, 1250, 1.000, true);
        sink.receive(&mut p, 1.012, &mut stats).unwrap();
        assert_relative_eq!(stats.delay_sum_s, 0.012, epsilon = 1e-12);
        assert_eq!(p.t_delivered, Some(1.012));
        assert_eq!(
            sink.receive(&mut p, 1.013, &mut stats),
            Err(TrafficError::DuplicateDelivery { flow_id: 0, seq: 0 })
        );
        assert_eq!(stats.rx_packets, 1);
    }

    #[test]
    fn overload_drop_fraction_matches_flow_conservation() {
        // offered 40 Mb/s into a 17 Mb/s server, 10 s of fluid time in 1 ms steps
        let mut q = FlowQueue::new(100);
        let (mut offered, mut dropped) = (0u64, 0u64);
        let mut credit = 0.0;
        let mut seq = 0;
        for _ in 0..10_000 {
            credit += 40e6 * 1e-3 / 10_000.0;
            while credit >= 1.0 {
                credit -= 1.0;
                offered += 1;
                if let EnqueueOutcome::Dropped(_) = q.enqueue(Packet::new(0, seq, 1250, 0.0, true)) {
                    dropped += 1;
                }
                seq += 1;
            }
            q.serve(17e6 * 1e-3);
        }
        let frac = dropped as f64 / offered as f64;
        assert!((frac - (1.0 - 17.0 / 40.0)).abs() < 0.01, "{frac}");
    }

    proptest! {
        #[test]
        fn cbr_count(start in 0.0f64..10.0, len in 0.0f64..5.0, rate_mbps in 0.5f64..10.0) {
            let s = stream(rate_mbps * 1e6, start, start + len);
            let n = cbr_emit_times(&s).len() as f64;
            let expected = (len * rate_mbps * 1e6 / (8.0 * 1250.0)).floor();
            prop_assert!((n - expected).abs() <= 1.0);
        }
    }
}
