//! Numerology, link abstraction, MAC schedulers and HARQ.

use thiserror::Error;

use crate::engine::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhyError {
    #[error("unsupported sub-carrier spacing {0} kHz (expected 15, 30, 60 or 120)")]
    UnsupportedSpacing(u32),
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

pub const SYMBOLS_PER_SLOT: u32 = 14;

/// OFDM numerology: slot length shrinks as the sub-carrier spacing grows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerology {
    pub scs_khz: u32,
    pub slot_duration_s: f64,
    pub symbols_per_slot: u32,
}

impl Numerology {
    pub fn new(scs_khz: u32) -> Result<Self, PhyError> {
        Ok(Numerology {
            scs_khz,
            slot_duration_s: slot_duration_s(scs_khz)?,
            symbols_per_slot: SYMBOLS_PER_SLOT,
        })
    }
}

pub fn slot_duration_s(scs_khz: u32) -> Result<f64, PhyError> {
    match scs_khz {
        15 | 30 | 60 | 120 => Ok(0.001 * 15.0 / f64::from(scs_khz)),
        other => Err(PhyError::UnsupportedSpacing(other)),
    }
}

/// Truncated-Shannon link abstraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkAdaptation {
    pub overhead: f64,
    pub eff_max: f64,
    pub snr_floor_db: f64,
}

impl LinkAdaptation {
    pub fn lte_default() -> Self {
        LinkAdaptation {
            overhead: 0.75,
            eff_max: 4.5,
            snr_floor_db: -5.0,
        }
    }

    pub fn nr_default() -> Self {
        LinkAdaptation {
            overhead: 0.7,
            eff_max: 7.0,
            snr_floor_db: -5.0,
        }
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        if !(self.overhead > 0.0 && self.overhead <= 1.0) {
            return Err(PhyError::InvalidParameter {
                name: "la_overhead",
                reason: format!("must lie in (0, 1], got {}", self.overhead),
            });
        }
        if !(self.eff_max > 0.0) {
            return Err(PhyError::InvalidParameter {
                name: "la_eff_max",
                reason: format!("must be > 0, got {}", self.eff_max),
            });
        }
        Ok(())
    }
}

pub fn achievable_rate_bps(snr_db: f64, bandwidth_hz: f64, la: &LinkAdaptation) -> f64 {
    if snr_db.is_nan() || snr_db < la.snr_floor_db {
        return 0.0;
    }
    let efficiency = (1.0 + 10f64.powf(snr_db / 10.0)).log2().min(la.eff_max);
    bandwidth_hz * la.overhead * efficiency
}

/// Proportional-fair resource-block scheduler state.
#[derive(Debug, Clone, PartialEq)]
pub struct PfScheduler {
    window: f64,
    averages: Vec<f64>,
}

/// Initial smoothed rate, 1 kb/s.
pub const PF_INITIAL_AVERAGE_BPS: f64 = 1e3;

impl PfScheduler {
    pub fn new(n_ues: usize, window: u32) -> Self {
        Self::with_averages(vec![PF_INITIAL_AVERAGE_BPS; n_ues], window)
    }

    pub fn with_averages(averages: Vec<f64>, window: u32) -> Self {
        PfScheduler {
            window: f64::from(window.max(1)),
            averages,
        }
    }

    pub fn averages(&self) -> &[f64] {
        &self.averages
    }

    /// Grant `resources` blocks for one interval of `tti_s` seconds.
    ///
    /// Each block goes to the UE with the largest `rate / average` among
    /// those whose backlog is not yet covered; ties go to the lower index.
    /// Averages are then smoothed with the bits actually served.
    pub fn allocate(&mut self, rates_bps: &[f64], backlog_bits: &[f64], resources: u32, tti_s: f64) -> Vec<u32> {
        let n = self.averages.len();
        debug_assert_eq!(rates_bps.len(), n);
        debug_assert_eq!(backlog_bits.len(), n);
        let mut alloc = vec![0u32; n];
        let mut need: Vec<f64> = backlog_bits.to_vec();

        for _ in 0..resources {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..n {
                if need[i] <= 0.0 || rates_bps[i] <= 0.0 {
                    continue;
                }
                let metric = rates_bps[i] / self.averages[i];
                if best.is_none_or(|(_, m)| metric > m) {
                    best = Some((i, metric));
                }
            }
            let Some((ue, _)) = best else { break };
            alloc[ue] += 1;
            need[ue] -= rates_bps[ue] * tti_s;
        }

        let keep = 1.0 - 1.0 / self.window;
        for i in 0..n {
            let capacity = f64::from(alloc[i]) * rates_bps[i] * tti_s;
            let served_bps = capacity.min(backlog_bits[i].max(0.0)) / tti_s;
            self.averages[i] = keep * self.averages[i] + served_bps / self.window;
        }
        alloc
    }
}

/// Slot-level round robin: one UE owns each slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundRobin {
    next: usize,
}

impl RoundRobin {
    pub fn new() -> Self {
        Self::default()
    }

    /// Next backlogged UE at or after the rotation pointer, or `None` for an idle slot.
    pub fn pick(&mut self, backlogged: &[bool]) -> Option<usize> {
        let n = backlogged.len();
        if n == 0 {
            return None;
        }
        let start = self.next % n;
        let ue = (0..n).map(|k| (start + k) % n).find(|&i| backlogged[i])?;
        self.next = (ue + 1) % n;
        Some(ue)
    }
}

/// Logistic block-error curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlerCurve {
    pub threshold_db: f64,
    pub steepness_db: f64,
}

impl Default for BlerCurve {
    fn default() -> Self {
        BlerCurve {
            threshold_db: 3.0,
            steepness_db: 1.0,
        }
    }
}

impl BlerCurve {
    pub fn at(&self, snr_db: f64) -> f64 {
        bler(snr_db, self.threshold_db, self.steepness_db)
    }
}

pub fn bler(snr_db: f64, threshold_db: f64, steepness_db: f64) -> f64 {
    1.0 / (1.0 + ((snr_db - threshold_db) / steepness_db).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarqProcess {
    pub max_retx: u32,
    pub combining_gain_db: f64,
    pub rtt_s: f64,
}

impl HarqProcess {
    pub fn lte_default() -> Self {
        HarqProcess {
            max_retx: 3,
            combining_gain_db: 2.0,
            rtt_s: 0.008,
        }
    }

    /// Four 120 kHz slots.
    pub fn nr_default() -> Self {
        HarqProcess {
            max_retx: 3,
            combining_gain_db: 2.0,
            rtt_s: 4.0 * 0.000125,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HarqOutcome {
    Delivered { attempts: u32, added_delay_s: f64 },
    Dropped { attempts: u32 },
}

impl HarqOutcome {
    pub fn attempts(&self) -> u32 {
        match *self {
            HarqOutcome::Delivered { attempts, .. } | HarqOutcome::Dropped { attempts } => attempts,
        }
    }
}

/// Run up to `1 + max_retx` attempts; attempt `k` (from 1) fails with
/// probability `error_prob(k)`.
pub fn harq_attempts<F>(h: &HarqProcess, rng: &mut RngStream, mut error_prob: F) -> HarqOutcome
where
    F: FnMut(u32) -> f64,
{
    let total = h.max_retx + 1;
    for k in 1..=total {
        if !rng.bernoulli(error_prob(k)) {
            return HarqOutcome::Delivered {
                attempts: k,
                added_delay_s: f64::from(k - 1) * h.rtt_s,
            };
        }
    }
    HarqOutcome::Dropped { attempts: total }
}

/// Chase-combining HARQ: each retransmission adds `combining_gain_db` to the
/// effective SNR.
pub fn harq_transmit(snr_db: f64, h: &HarqProcess, curve: &BlerCurve, rng: &mut RngStream) -> HarqOutcome {
    harq_attempts(h, rng, |k| curve.at(snr_db + f64::from(k - 1) * h.combining_gain_db))
}
