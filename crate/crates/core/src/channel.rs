//! Radio channel: carrier raster conversion, propagation loss, noise and
//! the per-UE SNR seen by the scheduler.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::engine::RngStream;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("EARFCN {earfcn} is outside band 1 {direction} range {low}..={high}")]
    EarfcnOutOfBand {
        earfcn: u32,
        direction: Direction,
        low: u32,
        high: u32,
    },
    #[error("NR-ARFCN {0} is below the 60 kHz raster segment (starts at 2016667)")]
    NrArfcnBelowSegment(u32),
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("distance {distance} m is beyond the {max_range} m coverage limit")]
    OutOfCoverage { distance: f64, max_range: f64 },
    #[error("invalid radio parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rat {
    Lte,
    Nr,
}

impl Rat {
    pub const ALL: [Rat; 2] = [Rat::Lte, Rat::Nr];

    pub fn as_str(self) -> &'static str {
        match self {
            Rat::Lte => "lte",
            Rat::Nr => "nr",
        }
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lte" => Ok(Rat::Lte),
            "nr" | "5g" | "nr-mmwave" | "mmwave" => Ok(Rat::Nr),
            other => Err(format!("unknown RAT '{other}' (expected lte or nr)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Downlink,
    Uplink,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Downlink => "downlink",
            Direction::Uplink => "uplink",
        })
    }
}

// Band 1 raster: (F_low MHz, N_offset, N_max)
const BAND1_DL: (f64, u32, u32) = (2110.0, 0, 599);
const BAND1_UL: (f64, u32, u32) = (1920.0, 18000, 18599);

/// Band 1 EARFCN to carrier frequency in MHz.
pub fn earfcn_to_freq_mhz(earfcn: u32, direction: Direction) -> Result<f64, ChannelError> {
    let (f_low, offset, max) = match direction {
        Direction::Downlink => BAND1_DL,
        Direction::Uplink => BAND1_UL,
    };
    if earfcn < offset || earfcn > max {
        return Err(ChannelError::EarfcnOutOfBand {
            earfcn,
            direction,
            low: offset,
            high: max,
        });
    }
    // integer count of 100 kHz steps keeps the result exact on the raster
    Ok((f_low * 10.0 + f64::from(earfcn - offset)) / 10.0)
}

/// Band 1 direction implied by the EARFCN range.
pub fn earfcn_direction(earfcn: u32) -> Option<Direction> {
    if earfcn <= BAND1_DL.2 {
        Some(Direction::Downlink)
    } else if (BAND1_UL.1..=BAND1_UL.2).contains(&earfcn) {
        Some(Direction::Uplink)
    } else {
        None
    }
}

const NR_SEGMENT_START: u32 = 2_016_667;
// 24250.08 MHz expressed in 10 kHz units
const NR_SEGMENT_BASE_10KHZ: u64 = 2_425_008;

/// Global NR raster, 60 kHz segment (FR2): F = 24250.08 MHz + 0.06 MHz·(N − 2016667).
pub fn nr_arfcn_to_freq_mhz(nr_arfcn: u32) -> Result<f64, ChannelError> {
    if nr_arfcn < NR_SEGMENT_START {
        return Err(ChannelError::NrArfcnBelowSegment(nr_arfcn));
    }
    let steps = u64::from(nr_arfcn - NR_SEGMENT_START);
    Ok((NR_SEGMENT_BASE_10KHZ + 6 * steps) as f64 / 100.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn wavelength_m(carrier_freq_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_freq_hz
}

/// Friis free-space received power, all quantities linear (W, gains, m).
pub fn friis_rx_power(
    tx_power_w: f64,
    gt: f64,
    gr: f64,
    lambda: f64,
    d: f64,
    loss: f64,
) -> Result<f64, ChannelError> {
    if !(d > 0.0) {
        return Err(ChannelError::NonPositiveDistance(d));
    }
    if !(loss >= 1.0) {
        return Err(ChannelError::InvalidParameter {
            name: "system_loss",
            reason: format!("must be >= 1, got {loss}"),
        });
    }
    if !(gt > 0.0 && gr > 0.0) {
        return Err(ChannelError::InvalidParameter {
            name: "antenna gain",
            reason: "linear gains must be positive".into(),
        });
    }
    let four_pi_d = 4.0 * PI * d;
    Ok(tx_power_w * gt * gr * lambda * lambda / (four_pi_d * four_pi_d * loss))
}

/// Free-space path loss in dB including the system loss term.
pub fn friis_path_loss_db(lambda: f64, d: f64, loss: f64) -> Result<f64, ChannelError> {
    let ratio = friis_rx_power(1.0, 1.0, 1.0, lambda, d, loss)?;
    Ok(-linear_to_db(ratio))
}

/// Statistical LOS path-loss coefficients for the mmWave link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmWavePathLossParams {
    pub alpha_db: f64,
    pub beta: f64,
    pub sigma_db: f64,
    pub max_range_m: f64,
}

impl Default for MmWavePathLossParams {
    /// 28 GHz LOS fit.
    fn default() -> Self {
        MmWavePathLossParams {
            alpha_db: 61.4,
            beta: 2.0,
            sigma_db: 5.8,
            max_range_m: 200.0,
        }
    }
}

impl MmWavePathLossParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.beta > 0.0) {
            return Err(invalid("mmwave_beta", "must be > 0"));
        }
        if !(self.sigma_db >= 0.0) {
            return Err(invalid("mmwave_sigma", "must be >= 0"));
        }
        if !(self.max_range_m > 0.0) {
            return Err(invalid("max_range_m", "must be > 0"));
        }
        Ok(())
    }
}

fn invalid(name: &'static str, reason: &str) -> ChannelError {
    ChannelError::InvalidParameter {
        name,
        reason: reason.to_string(),
    }
}

/// PL = alpha + 10·beta·log10(d / 1 m) + shadow. Distances below 1 m are
/// evaluated at 1 m.
pub fn mmwave_pathloss_db(
    d: f64,
    params: &MmWavePathLossParams,
    shadow_db: f64,
) -> Result<f64, ChannelError> {
    if !(d > 0.0) {
        return Err(ChannelError::NonPositiveDistance(d));
    }
    if d > params.max_range_m {
        return Err(ChannelError::OutOfCoverage {
            distance: d,
            max_range: params.max_range_m,
        });
    }
    Ok(params.alpha_db + 10.0 * params.beta * d.max(1.0).log10() + shadow_db)
}

pub fn noise_power_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

/// Physical parameters of one radio access technology.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioConfig {
    pub rat: Rat,
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    /// Linear, ≥ 1.
    pub system_loss: f64,
    pub noise_figure_db: f64,
    pub mmwave: MmWavePathLossParams,
}

impl RadioConfig {
    /// Uplink on band 1 (EARFCN 18100), 25 resource blocks.
    pub fn lte_default() -> Self {
        RadioConfig {
            rat: Rat::Lte,
            carrier_freq_hz: 1930.0e6,
            bandwidth_hz: 5.0e6,
            tx_power_dbm: 23.0,
            tx_gain_dbi: 0.0,
            rx_gain_dbi: 0.0,
            system_loss: 1.0,
            noise_figure_db: 9.0,
            mmwave: MmWavePathLossParams::default(),
        }
    }

    /// 28 GHz carrier inside n257, one 100 MHz channel, beamformed gains.
    pub fn nr_default() -> Self {
        RadioConfig {
            rat: Rat::Nr,
            carrier_freq_hz: 28.0e9,
            bandwidth_hz: 100.0e6,
            tx_power_dbm: 23.0,
            tx_gain_dbi: 10.0,
            rx_gain_dbi: 24.0,
            system_loss: 1.0,
            noise_figure_db: 7.0,
            mmwave: MmWavePathLossParams::default(),
        }
    }

    pub fn default_for(rat: Rat) -> Self {
        match rat {
            Rat::Lte => Self::lte_default(),
            Rat::Nr => Self::nr_default(),
        }
    }

    pub fn wavelength_m(&self) -> f64 {
        wavelength_m(self.carrier_freq_hz)
    }

    pub fn noise_dbm(&self) -> f64 {
        noise_power_dbm(self.bandwidth_hz, self.noise_figure_db)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.carrier_freq_hz > 0.0) {
            return Err(invalid("carrier_freq_mhz", "must be > 0"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(invalid("bandwidth_mhz", "must be > 0"));
        }
        if !(self.system_loss >= 1.0) {
            return Err(invalid("system_loss", "must be >= 1"));
        }
        if self.rat == Rat::Nr {
            self.mmwave.validate()?;
        }
        Ok(())
    }

    pub fn pathloss_db(&self, d: f64, shadow_db: f64) -> Result<f64, ChannelError> {
        match self.rat {
            Rat::Lte => Ok(friis_path_loss_db(self.wavelength_m(), d, self.system_loss)? + shadow_db),
            Rat::Nr => mmwave_pathloss_db(d, &self.mmwave, shadow_db),
        }
    }

    /// Link budget at distance `d` with extra degradation `penalties_db`.
    pub fn snr_db(&self, d: f64, penalties_db: f64, shadow_db: f64) -> Result<ChannelSample, ChannelError> {
        let pathloss_db = self.pathloss_db(d, shadow_db)?;
        let rx_power_dbm = self.tx_power_dbm + self.tx_gain_dbi + self.rx_gain_dbi - pathloss_db;
        let noise_dbm = self.noise_dbm();
        Ok(ChannelSample {
            distance_m: d,
            pathloss_db,
            rx_power_dbm,
            noise_dbm,
            snr_db: rx_power_dbm - penalties_db - noise_dbm,
            penalties_db,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    pub distance_m: f64,
    pub pathloss_db: f64,
    pub rx_power_dbm: f64,
    pub noise_dbm: f64,
    pub snr_db: f64,
    pub penalties_db: f64,
}

/// Empirical mobility degradation.
///
/// mmWave links fall into beam-tracking outage with logistic probability in
/// the UE speed; LTE sees a small deterministic ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityModel {
    pub v_mid_kmh: f64,
    pub s_v_kmh: f64,
    pub outage_db: f64,
    pub lte_slope_db_per_kmh: f64,
}

impl Default for VelocityModel {
    fn default() -> Self {
        VelocityModel {
            v_mid_kmh: 45.0,
            s_v_kmh: 4.0,
            outage_db: 100.0,
            lte_slope_db_per_kmh: 0.02,
        }
    }
}

impl VelocityModel {
    pub fn outage_probability(&self, speed_kmh: f64) -> f64 {
        1.0 / (1.0 + (-(speed_kmh - self.v_mid_kmh) / self.s_v_kmh).exp())
    }

    /// Degradation in dB for one coherence interval. Only the NR branch
    /// consumes a draw from `rng`.
    pub fn penalty_db(&self, rat: Rat, speed_kmh: f64, rng: &mut RngStream) -> f64 {
        let v = speed_kmh.max(0.0);
        match rat {
            Rat::Lte => self.lte_slope_db_per_kmh * v,
            Rat::Nr => {
                if rng.bernoulli(self.outage_probability(v)) {
                    self.outage_db
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn velocity_penalty_db(model: &VelocityModel, rat: Rat, speed_kmh: f64, rng: &mut RngStream) -> f64 {
    model.penalty_db(rat, speed_kmh, rng)
}
