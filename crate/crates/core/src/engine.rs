//! Discrete-event core: virtual clock, ordered event queue and named
//! random-number substreams.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Event times are ordered on a 1 µs grid.
pub const TIME_RESOLUTION_S: f64 = 1e-6;
const TICKS_PER_S: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("cannot schedule event at t={time}s: clock is already at {now}s")]
    InThePast { time: f64, now: f64 },
    #[error("run horizon {until}s lies before the clock ({now}s)")]
    HorizonInThePast { until: f64, now: f64 },
    #[error("invalid event time {0}")]
    InvalidTime(f64),
}

pub type EventId = u64;

/// Payload carried by an event. `kind` and `detail` feed the trace log.
pub trait EventAction {
    fn kind(&self) -> &'static str;

    fn detail(&self) -> String {
        String::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent<A> {
    pub time: f64,
    pub sequence: u64,
    pub action: A,
}

struct Entry<A> {
    tick: i64,
    event: SimEvent<A>,
}

impl<A> PartialEq for Entry<A> {
    fn eq(&self, other: &Self) -> bool {
        self.tick == other.tick && self.event.sequence == other.event.sequence
    }
}

impl<A> Eq for Entry<A> {}

impl<A> PartialOrd for Entry<A> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<A> Ord for Entry<A> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .tick
            .cmp(&self.tick)
            .then_with(|| other.event.sequence.cmp(&self.event.sequence))
    }
}

fn to_tick(time: f64) -> i64 {
    (time * TICKS_PER_S).round() as i64
}

/// Single-threaded event scheduler.
pub struct Engine<A> {
    now: f64,
    now_tick: i64,
    next_sequence: u64,
    processed: u64,
    queue: BinaryHeap<Entry<A>>,
    trace: Option<Box<dyn Write + Send>>,
}

impl<A: EventAction> Default for Engine<A> {
    fn default() -> Self {
        Self::new()
    }
}

impl<A: EventAction> Engine<A> {
    pub fn new() -> Self {
        Engine {
            now: 0.0,
            now_tick: 0,
            next_sequence: 0,
            processed: 0,
            queue: BinaryHeap::new(),
            trace: None,
        }
    }

    /// Write one line per processed event to `sink`.
    pub fn with_trace(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.trace = Some(sink);
        self
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.queue.peek().map(|e| e.event.time)
    }

    /// Enqueue `action` at absolute time `time`. Times are snapped to the
    /// 1 µs grid; the returned id is the event's sequence number.
    pub fn schedule(&mut self, time: f64, action: A) -> Result<EventId, EngineError> {
        if !time.is_finite() || time < 0.0 {
            return Err(EngineError::InvalidTime(time));
        }
        let tick = to_tick(time);
        if tick < self.now_tick {
            return Err(EngineError::InThePast {
                time,
                now: self.now,
            });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(Entry {
            tick,
            event: SimEvent {
                time: tick as f64 / TICKS_PER_S,
                sequence,
                action,
            },
        });
        Ok(sequence)
    }

    pub fn schedule_in(&mut self, delay: f64, action: A) -> Result<EventId, EngineError> {
        self.schedule(self.now + delay.max(0.0), action)
    }

    /// Pop the next event if it is due at or before `until`, advancing the clock.
    pub fn next_before(&mut self, until: f64) -> Option<SimEvent<A>> {
        let limit = to_tick(until);
        if self.queue.peek()?.tick > limit {
            return None;
        }
        let entry = self.queue.pop()?;
        self.now_tick = entry.tick;
        self.now = entry.event.time;
        self.processed += 1;
        if let Some(sink) = self.trace.as_mut() {
            let ev = &entry.event;
            let mut line = String::new();
            let _ = writeln!(
                line,
                "{:.6}\t{}\t{}\t{}",
                ev.time,
                ev.sequence,
                ev.action.kind(),
                ev.action.detail()
            );
            // trace output is best-effort
            let _ = sink.write_all(line.as_bytes());
        }
        Some(entry.event)
    }

    /// Process every event with time ≤ `until` in (time, sequence) order,
    /// then set the clock to `until`. The handler may schedule new events.
    pub fn run<F>(&mut self, until: f64, mut handler: F) -> Result<u64, EngineError>
    where
        F: FnMut(&mut Self, SimEvent<A>),
    {
        if to_tick(until) < self.now_tick {
            return Err(EngineError::HorizonInThePast {
                until,
                now: self.now,
            });
        }
        let mut count = 0;
        while let Some(event) = self.next_before(until) {
            handler(self, event);
            count += 1;
        }
        self.now_tick = to_tick(until);
        self.now = until;
        if let Some(sink) = self.trace.as_mut() {
            let _ = sink.flush();
        }
        Ok(count)
    }
}

fn fnv1a(label: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// SplitMix64 finalizer, used for seed derivation.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic random substream identified by `(label, seed)`.
///
/// The seed keys a ChaCha8 generator and the label selects its stream
/// number, so distinct labels never share keystream.
#[derive(Clone, Debug)]
pub struct RngStream {
    label: String,
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(label: &str, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(fnv1a(label));
        RngStream {
            label: label.to_string(),
            seed,
            rng,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Normal(mean, sd); `sd == 0` returns `mean` without consuming a draw.
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        if sd <= 0.0 {
            return mean;
        }
        match Normal::new(mean, sd) {
            Ok(dist) => dist.sample(&mut self.rng),
            Err(_) => mean,
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn rng_stream(label: &str, seed: u64) -> RngStream {
    RngStream::new(label, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, PartialEq)]
    struct Tag(&'static str);

    impl EventAction for Tag {
        fn kind(&self) -> &'static str {
            self.0
        }
    }

    #[test]
    fn first_event_gets_id_zero() {
        let mut engine = Engine::new();
        assert_eq!(engine.schedule(0.0, Tag("a")).unwrap(), 0);
        assert_eq!(engine.peek_time(), Some(0.0));
    }

    #[test]
    fn ties_break_by_insertion_order() {
        let mut engine = Engine::new();
        engine.schedule(1.0, Tag("A")).unwrap();
        engine.schedule(1.0, Tag("B")).unwrap();
        let mut seen = Vec::new();
        engine.run(2.0, |_, ev| seen.push(ev.action.0)).unwrap();
        assert_eq!(seen, vec!["A", "B"]);
    }

    #[test]
    fn past_scheduling_is_rejected() {
        let mut engine: Engine<Tag> = Engine::new();
        engine.run(1.0, |_, _| {}).unwrap();
        assert!(matches!(
            engine.schedule(0.5, Tag("late")),
            Err(EngineError::InThePast { .. })
        ));
        assert!(engine.run(0.5, |_, _| {}).is_err());
    }

    #[test]
    fn run_processes_due_events_and_sets_clock() {
        let mut engine = Engine::new();
        for t in [0.3, 0.1, 0.2] {
            engine.schedule(t, Tag("x")).unwrap();
        }
        let mut times = Vec::new();
        assert_eq!(engine.run(1.0, |_, ev| times.push(ev.time)).unwrap(), 3);
        assert_eq!(times, vec![0.1, 0.2, 0.3]);
        assert_eq!(engine.now(), 1.0);
        assert_eq!(engine.run(1.0, |_, _| {}).unwrap(), 0);
    }

    #[test]
    fn handler_can_schedule_follow_ups() {
        let mut engine = Engine::new();
        engine.schedule(0.0, Tag("tick")).unwrap();
        let n = engine
            .run(0.0105, |eng, _| {
                let _ = eng.schedule_in(0.001, Tag("tick"));
            })
            .unwrap();
        assert_eq!(n, 11);
        assert_eq!(engine.pending(), 1);
    }

    #[test]
    fn events_beyond_horizon_stay_queued() {
        let mut engine = Engine::new();
        engine.schedule(0.5, Tag("a")).unwrap();
        engine.schedule(1.5, Tag("b")).unwrap();
        assert_eq!(engine.run(1.0, |_, _| {}).unwrap(), 1);
        assert_eq!(engine.pending(), 1);
    }

    #[test]
    fn same_label_and_seed_repeat() {
        let mut a = rng_stream("harq", 42);
        let mut b = rng_stream("harq", 42);
        for _ in 0..1000 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn different_seed_or_label_differs() {
        let draw = |label, seed| {
            let mut s = rng_stream(label, seed);
            (0..16).map(|_| s.next_u64()).collect::<Vec<_>>()
        };
        assert_ne!(draw("harq", 42), draw("harq", 43));
        assert_ne!(draw("harq", 42), draw("shadowing", 42));
    }

    #[test]
    fn uniform_mean_is_one_half() {
        // 3σ for the mean of 1e5 U(0,1) draws is 3·sqrt(1/12/1e5) ≈ 0.0027
        let mut s = rng_stream("uniform-check", 7);
        let n = 100_000;
        let mean = (0..n).map(|_| s.uniform()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn trace_lines_are_tab_separated() {
        use std::sync::{Arc, Mutex};

        #[derive(Clone, Default)]
        struct Shared(Arc<Mutex<Vec<u8>>>);
        impl Write for Shared {
            fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
                self.0.lock().unwrap().extend_from_slice(buf);
                Ok(buf.len())
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }

        let buf = Shared::default();
        let mut engine = Engine::new().with_trace(Box::new(buf.clone()));
        engine.schedule(0.25, Tag("arrival")).unwrap();
        engine.run(1.0, |_, _| {}).unwrap();
        let text = String::from_utf8(buf.0.lock().unwrap().clone()).unwrap();
        assert_eq!(text, "0.250000\t0\tarrival\t\n");
    }
}
