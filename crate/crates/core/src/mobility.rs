//! UE placement and constant-velocity motion inside a radial corridor
//! around the base station at the origin.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

pub type Position = [f64; 2];

pub const KMH_PER_MPS: f64 = 3.6;

pub fn distance_m(a: Position, b: Position) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn norm(p: Position) -> f64 {
    p[0].hypot(p[1])
}

/// Fold `x` into `[lo, hi]` as if it bounced between the two walls.
fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    let period = 2.0 * span;
    let m = (x - lo).rem_euclid(period);
    if m <= span {
        lo + m
    } else {
        hi - (m - span)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityState {
    pub position: Position,
    /// m/s
    pub velocity: [f64; 2],
    pub min_r: f64,
    pub max_r: f64,
}

impl MobilityState {
    pub fn fixed(position: Position, min_r: f64, max_r: f64) -> Self {
        MobilityState {
            position,
            velocity: [0.0, 0.0],
            min_r,
            max_r,
        }
    }

    /// UE at `radius` on bearing `bearing_rad`, moving outward at `speed_mps`.
    pub fn radial(radius: f64, bearing_rad: f64, speed_mps: f64, min_r: f64, max_r: f64) -> Self {
        let (s, c) = bearing_rad.sin_cos();
        MobilityState {
            position: [radius * c, radius * s],
            velocity: [speed_mps * c, speed_mps * s],
            min_r,
            max_r,
        }
    }

    pub fn speed_mps(&self) -> f64 {
        norm(self.velocity)
    }

    /// Position after `t` seconds.
    ///
    /// Motion along the starting radial axis bounces between `min_r` and
    /// `max_r`; any tangential drift is kept and the result is clamped to
    /// `max_r`.
    pub fn position_at(&self, t: f64) -> Position {
        if self.velocity == [0.0, 0.0] {
            return self.position;
        }
        let r0 = norm(self.position);
        let axis = if r0 > 0.0 {
            [self.position[0] / r0, self.position[1] / r0]
        } else {
            let v = self.speed_mps();
            [self.velocity[0] / v, self.velocity[1] / v]
        };
        let ortho = [-axis[1], axis[0]];
        let raw = [self.position[0] + self.velocity[0] * t, self.position[1] + self.velocity[1] * t];
        let along = raw[0] * axis[0] + raw[1] * axis[1];
        let across = raw[0] * ortho[0] + raw[1] * ortho[1];
        let along = reflect(along, self.min_r, self.max_r);
        let mut p = [along * axis[0] + across * ortho[0], along * axis[1] + across * ortho[1]];
        let r = norm(p);
        if r > self.max_r {
            p = [p[0] * self.max_r / r, p[1] * self.max_r / r];
        }
        p
    }

    pub fn distance_at(&self, t: f64) -> f64 {
        norm(self.position_at(t))
    }
}

/// How UEs are laid out at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    /// Explicit radii, reused cyclically when there are more UEs than entries.
    Radii(Vec<f64>),
    /// Evenly spaced radii from `min` to `max` inclusive.
    Uniform { min: f64, max: f64 },
}

impl Placement {
    pub fn radii(&self, n: usize) -> Vec<f64> {
        match self {
            Placement::Radii(r) if r.is_empty() => vec![1.0; n],
            Placement::Radii(r) => (0..n).map(|i| r[i % r.len()]).collect(),
            Placement::Uniform { min, max } => match n {
                0 => vec![],
                1 => vec![*min],
                _ => (0..n)
                    .map(|i| min + (max - min) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }

    /// One UE per radius, spread evenly in bearing, all moving outward at
    /// `speed_kmh`.
    pub fn layout(&self, n: usize, speed_kmh: f64, min_r: f64, max_r: f64) -> Vec<MobilityState> {
        let speed = speed_kmh / KMH_PER_MPS;
        self.radii(n)
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let bearing = 2.0 * PI * i as f64 / n as f64;
                MobilityState::radial(r, bearing, speed, min_r, max_r)
            })
            .collect()
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Placement::Uniform { min, max } => write!(f, "uniform:{min},{max}"),
            Placement::Radii(r) => {
                let parts: Vec<String> = r.iter().map(|x| x.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl FromStr for Placement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("uniform:") {
            let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(format!("expected uniform:min,max, got '{s}'"));
            }
            let min: f64 = parts[0].parse().map_err(|_| format!("bad number '{}'", parts[0]))?;
            let max: f64 = parts[1].parse().map_err(|_| format!("bad number '{}'", parts[1]))?;
            if !(min > 0.0 && max >= min) {
                return Err(format!("need 0 < min <= max in '{s}'"));
            }
            return Ok(Placement::Uniform { min, max });
        }
        let radii = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad radius '{}'", p.trim())))
            .collect::<Result<Vec<_>, _>>()?;
        if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
            return Err(format!("radii must be positive in '{s}'"));
        }
        Ok(Placement::Radii(radii))
    }
}
