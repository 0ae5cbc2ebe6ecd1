//! Seeded presence profiles and the comfort bounds they induce.
//!
//! Presence follows a two-state Markov chain: an absent household arrives
//! with probability `p_arrive` per step and a present one leaves with
//! probability `p_leave`. Sampling uses ChaCha8 seeded from a `u64`, so a
//! seed fully determines the sequence on every platform.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum OccupancyError {
    #[error("profile must have at least one step")]
    Empty,
    #[error("probability `{name}` = {value} is outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("dt_hours must be > 0, got {0}")]
    TimeStep(f64),
    #[error("profile CSV line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPresence {
    Absent,
    Present,
    /// Draw the first step from the chain's stationary distribution.
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyParams {
    pub p_arrive: f64,
    pub p_leave: f64,
    pub initial: InitialPresence,
}

impl OccupancyParams {
    /// Chain with the given mean absence length and long-run occupied fraction.
    pub fn from_absence(mean_absence_hours: f64, occupied_fraction: f64, dt_hours: f64) -> Self {
        let p_arrive = (dt_hours / mean_absence_hours).min(1.0);
        let p_leave = (p_arrive * (1.0 - occupied_fraction) / occupied_fraction).min(1.0);
        Self {
            p_arrive,
            p_leave,
            initial: InitialPresence::Stationary,
        }
    }

    /// ≈60 % occupancy with 8 h mean absences.
    pub fn default_for(dt_hours: f64) -> Self {
        Self::from_absence(8.0, 0.6, dt_hours)
    }

    pub fn stationary_occupied(&self) -> f64 {
        let s = self.p_arrive + self.p_leave;
        if s == 0.0 {
            0.0
        } else {
            self.p_arrive / s
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyProfile {
    pub seed: u64,
    pub presence: Vec<bool>,
    pub dt_hours: f64,
}

impl OccupancyProfile {
    pub fn len(&self) -> usize {
        self.presence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.presence.is_empty()
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.presence.iter().filter(|p| **p).count() as f64 / self.presence.len() as f64
    }

    pub fn write_csv(&self, out: impl Write) -> Result<(), OccupancyError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step_index", "presence"]).map_err(csv_err)?;
        for (i, p) in self.presence.iter().enumerate() {
            w.write_record([i.to_string(), u8::from(*p).to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(input: impl Read, seed: u64, dt_hours: f64) -> Result<Self, OccupancyError> {
        let mut r = csv::Reader::from_reader(input);
        let mut presence = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |message: String| OccupancyError::Csv { line, message };
            if rec.len() != 2 {
                return Err(bad(format!("expected 2 fields, found {}", rec.len())));
            }
            let idx: usize = rec[0].trim().parse().map_err(|_| bad(format!("bad step_index `{}`", &rec[0])))?;
            if idx != presence.len() {
                return Err(bad(format!("step_index {idx} out of sequence")));
            }
            presence.push(match rec[1].trim() {
                "0" => false,
                "1" => true,
                other => return Err(bad(format!("presence must be 0 or 1, got `{other}`"))),
            });
        }
        if presence.is_empty() {
            return Err(OccupancyError::Empty);
        }
        Ok(Self {
            seed,
            presence,
            dt_hours,
        })
    }
}

fn csv_err(e: csv::Error) -> OccupancyError {
    let line = e.position().map_or(0, |p| p.line());
    OccupancyError::Csv {
        line,
        message: e.to_string(),
    }
}

pub fn generate_profile(
    seed: u64,
    n_steps: usize,
    dt_hours: f64,
    params: &OccupancyParams,
) -> Result<OccupancyProfile, OccupancyError> {
    if n_steps == 0 {
        return Err(OccupancyError::Empty);
    }
    for (name, value) in [("p_arrive", params.p_arrive), ("p_leave", params.p_leave)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(OccupancyError::Probability { name, value });
        }
    }
    if !(dt_hours > 0.0) {
        return Err(OccupancyError::TimeStep(dt_hours));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut present = match params.initial {
        InitialPresence::Absent => false,
        InitialPresence::Present => true,
        InitialPresence::Stationary => rng.gen::<f64>() < params.stationary_occupied(),
    };
    let mut presence = Vec::with_capacity(n_steps);
    presence.push(present);
    for _ in 1..n_steps {
        let u: f64 = rng.gen();
        present = if present { u >= params.p_leave } else { u < params.p_arrive };
        presence.push(present);
    }
    Ok(OccupancyProfile {
        seed,
        presence,
        dt_hours,
    })
}

/// Seed of profile `index` in an ensemble: SplitMix64 of `master + index`.
pub fn derive_profile_seed(master_seed: u64, index: usize) -> u64 {
    let mut z = master_seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneSetpoints {
    pub occupied_lo: f64,
    pub occupied_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComfortSetpoints {
    /// Zone 0 is the day zone, zone 1 the night zone.
    pub zones: Vec<ZoneSetpoints>,
    pub unoccupied_lo: f64,
    pub hw_lo: f64,
    pub hw_hi: f64,
}

impl Default for ComfortSetpoints {
    fn default() -> Self {
        Self {
            zones: vec![
                ZoneSetpoints {
                    occupied_lo: 20.0,
                    occupied_hi: 22.0,
                },
                ZoneSetpoints {
                    occupied_lo: 18.0,
                    occupied_hi: 20.0,
                },
            ],
            unoccupied_lo: 16.0,
            hw_lo: 45.0,
            hw_hi: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComfortSchedule {
    /// `t_lo[step][zone]`
    pub t_lo: Vec<Vec<f64>>,
    pub t_hi: Vec<Vec<f64>>,
    pub hw_lo: Vec<f64>,
    pub hw_hi: Vec<f64>,
}

impl ComfortSchedule {
    pub fn len(&self) -> usize {
        self.t_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_lo.is_empty()
    }
}

pub fn comfort_bounds(profile: &OccupancyProfile) -> ComfortSchedule {
    comfort_bounds_with(profile, &ComfortSetpoints::default())
}

/// Pointwise map from presence to bounds: occupied steps use each zone's
/// occupied band, unoccupied steps lower every zone's floor to
/// `unoccupied_lo` and keep the upper bounds.
pub fn comfort_bounds_with(profile: &OccupancyProfile, sp: &ComfortSetpoints) -> ComfortSchedule {
    let n = profile.len();
    let mut t_lo = Vec::with_capacity(n);
    let mut t_hi = Vec::with_capacity(n);
    for &present in &profile.presence {
        t_lo.push(
            sp.zones
                .iter()
                .map(|z| if present { z.occupied_lo } else { sp.unoccupied_lo.min(z.occupied_lo) })
                .collect(),
        );
        t_hi.push(sp.zones.iter().map(|z| z.occupied_hi).collect());
    }
    ComfortSchedule {
        t_lo,
        t_hi,
        hw_lo: vec![sp.hw_lo; n],
        hw_hi: vec![sp.hw_hi; n],
    }
}

/// Daily hot-water draw pulses, applied only while someone is home.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawTemplate {
    /// `(start hour, duration hours, thermal kW)`
    pub pulses: Vec<(f64, f64, f64)>,
}

impl Default for DrawTemplate {
    fn default() -> Self {
        Self {
            pulses: vec![(7.0, 0.75, 4.0), (19.0, 1.0, 3.0)],
        }
    }
}

impl DrawTemplate {
    pub fn series(&self, n_steps: usize, dt_hours: f64) -> Vec<f64> {
        (0..n_steps)
            .map(|t| {
                let hour = (t as f64 * dt_hours) % 24.0;
                self.pulses
                    .iter()
                    .filter(|(start, dur, _)| hour >= *start - 1e-9 && hour < start + dur - 1e-9)
                    .map(|(_, _, kw)| kw)
                    .sum()
            })
            .collect()
    }
}
